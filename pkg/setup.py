"""Build script for the optional compiled histogram kernels.

The package is fully functional without the extension: ``tilegraft._kernels``
falls back to the numpy implementation when ``tilegraft._fastk`` is absent.
Build in place with ``python3 setup.py build_ext --inplace``.
"""

import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "tilegraft._fastk",
                ["src/tilegraft/_fastk.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
