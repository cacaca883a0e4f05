"""Build script: compiles the optional extension core, falls back to pure Python.

Set TEMPSEG_NO_EXT=1 to skip the compiled kernels entirely; the package then
uses the numpy reference implementations selected at import time.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("TEMPSEG_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "tempseg._kernels._core",
                    ["src/tempseg/_kernels/_core.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
