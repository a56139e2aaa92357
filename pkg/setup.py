import os

import numpy as np
from setuptools import Extension, setup

# The compiled core is optional: without Cython (or with FICIC_NO_EXT=1) the
# package installs with the pure-Python kernels only.
ext_modules = []
if not os.environ.get("FICIC_NO_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext = Extension(
            "ficic._kernels._core",
            ["src/ficic/_kernels/_core.pyx"],
            include_dirs=[np.get_include()],
            extra_compile_args=["-O3"],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        )
        ext_modules = cythonize(
            [ext],
            compiler_directives={
                "language_level": 3,
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )

setup(ext_modules=ext_modules)
