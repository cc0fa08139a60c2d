"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (a numpy fallback is selected at
import time); set GAZECHUNKS_SKIP_EXTENSION=1 to install without a C
compiler.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("GAZECHUNKS_SKIP_EXTENSION"):
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "gazechunks._kernels",
                ["src/gazechunks/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
