"""Build the optional Cython stepping kernels.

The package works without the extension (a pure-Python/numpy fallback is
selected at import time); building it just makes environment stepping fast.
"""

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "coral.envs._grid_cy",
                ["src/coral/envs/_grid_cy.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
