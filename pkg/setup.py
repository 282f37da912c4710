import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "resmin._kernels",
                ["src/resmin/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    # No Cython available: install without the compiled core, the package
    # falls back to the numpy kernels at import time.
    ext_modules = []

setup(ext_modules=ext_modules)
