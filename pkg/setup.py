from setuptools import setup, Extension

import numpy

# The Jacobi eigensolver has a pure-python fallback selected at import time,
# so a failed compile only costs speed, not functionality.
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("starwpt.kernel._jacobi",
                   ["src/starwpt/kernel/_jacobi.pyx"],
                   include_dirs=[numpy.get_include()])],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
