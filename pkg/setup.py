"""Build script: compiles the optional Cython step kernels.

The package works without the extension (a vectorized numpy fallback is
selected at import time); set DEPHMON_NO_EXT=1 to skip compilation.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("DEPHMON_NO_EXT"):
    try:
        import numpy
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "dephmon._kernels_cy",
                    ["src/dephmon/_kernels_cy.pyx"],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    # -fcx-limited-range keeps complex mul/div out of the
                    # checked libgcc helpers; kernels never produce inf/nan
                    extra_compile_args=["-O3", "-fcx-limited-range"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
