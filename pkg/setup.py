import numpy as np
from setuptools import Extension, setup

# The compiled observation-loop kernels are optional: if Cython or a C
# compiler is unavailable the package falls back to the numpy kernels at
# import time (see qtensor/kernels.py).
try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "qtensor._obsloops",
                ["src/qtensor/_obsloops.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
