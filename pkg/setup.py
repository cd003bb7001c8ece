"""Build script for the optional compiled convolution kernels.

The package works without the extension (a numpy fallback is selected at
import time); building it just makes the hot depthwise-convolution loops
faster.  `pip install -e . --no-build-isolation` compiles it when Cython
and a C compiler are available.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "semsep.kernels._convkern",
                ["src/semsep/kernels/_convkern.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
