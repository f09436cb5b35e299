"""Build script: compiles the optional Cython kernel extension.

The extension accelerates the hot pointwise physics loops of the 2D
multicomponent-MHD solvers.  It is strictly optional: if Cython or a C
compiler is unavailable the build still succeeds and the package falls
back to the pure-NumPy kernels at import time.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("GQLIN_NO_EXTENSION", "0") != "1":
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext = Extension(
            "gqlin.kernels._cykernels",
            sources=["src/gqlin/kernels/_cykernels.pyx"],
            include_dirs=[numpy.get_include()],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            extra_compile_args=["-O3", "-march=native", "-funroll-loops"],
            optional=True,
        )
        ext_modules = cythonize(
            [ext],
            language_level=3,
            compiler_directives={
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
                "initializedcheck": False,
            },
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
