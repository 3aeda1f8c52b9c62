"""Build script: compiles the optional fast kernel extension.

The package works without the extension (a pure-Python backend is selected
at import time), so the build is marked optional and never fails an install.
"""

import warnings

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "tokenmark.kernels._speed",
                ["src/tokenmark/kernels/_speed.pyx"],
                optional=True,
            )
        ],
        language_level=3,
    )
except ImportError:
    warnings.warn("Cython not available; installing with the pure-Python kernel backend only")
    ext_modules = []

setup(ext_modules=ext_modules)
