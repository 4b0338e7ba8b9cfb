"""Build script: compiles the optional Cython kernel core.

The package works without the extension (a numpy fallback is selected at
import time), so the build degrades gracefully when Cython or a C compiler
is unavailable. Set SRLAB_SKIP_EXT=1 to skip the extension on purpose.
"""

import os

from setuptools import setup

extensions = []
if not os.environ.get("SRLAB_SKIP_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        extensions = cythonize(
            [
                Extension(
                    "srlab._kernels._core",
                    ["src/srlab/_kernels/_core.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
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
        extensions = []

setup(ext_modules=extensions)
