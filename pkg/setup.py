"""Build script: compiles the optional Cython core.

The package works without the extension (pure-NumPy fallback is selected at
import time), so a missing compiler or Cython only costs speed, not features.
Build in place with:

    python setup.py build_ext --inplace
"""
import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover - pure install
    cythonize = None

ext_modules = []
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "localbo._core_cy",
                ["src/localbo/_core_cy.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level="3",
    )

setup(ext_modules=ext_modules)
