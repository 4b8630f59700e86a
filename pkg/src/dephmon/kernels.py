"""Step-kernel backend selection.

The compiled Cython kernels are preferred when the extension was built;
otherwise the vectorized numpy implementation is used.  Both expose the same
interface and agree to ~1e-12 (verified in the test suite); set
DEPHMON_PURE_PY=1 to force the numpy backend, e.g. for benchmarking.
"""

import os

from . import _kernels_py

if os.environ.get("DEPHMON_PURE_PY"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels_cy as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernels_py

BACKEND = _impl.BACKEND
run_pd_batch = _impl.run_pd_batch
run_hd_batch = _impl.run_hd_batch
snapped_cos = _kernels_py.snapped_cos
