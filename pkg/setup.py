"""Build script for the optional compiled kernel core.

The extension accelerates the float-mode hot loops (sparse row-stochastic
vector/matrix application and distance accumulation).  If Cython or a C
compiler is unavailable the build degrades gracefully and the package falls
back to the pure-Python kernels at import time.
"""
import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("HEATBATH_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "heatbath._ckernels",
                    ["src/heatbath/_ckernels.pyx"],
                    optional=True,
                )
            ],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
