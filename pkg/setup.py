import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "cofact._kernels._speedups",
                ["src/cofact/_kernels/_speedups.pyx"],
                include_dirs=[numpy.get_include()],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    # Without Cython the package still installs; the pure-numpy kernel
    # backend is selected at import time.
    extensions = []

setup(ext_modules=extensions)
