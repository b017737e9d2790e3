"""Build script: compiles the optional C kernel extension.

The package works without the extension (a pure-Python fallback is
selected at import time), so any build failure here degrades to a
source-only install instead of aborting.
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/pondstat/_kernels/_ckernels.pyx"],
        compiler_directives={"language_level": "3"},
    )
except Exception as exc:  # pragma: no cover - build-env dependent
    print(f"pondstat: skipping compiled kernels ({exc}); pure-Python fallback will be used")

setup(ext_modules=ext_modules)
