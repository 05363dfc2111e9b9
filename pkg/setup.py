"""Build hook for the optional compiled simulation kernels.

The package works without the extension; ``storrel.sim`` falls back to the
pure-Python kernels when the compiled module cannot be imported.
"""
import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("STORREL_NO_EXT", "") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:  # pragma: no cover - build without Cython
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "storrel._kernels",
                    ["src/storrel/_kernels.pyx"],
                    # keep float semantics identical to the Python fallback
                    extra_compile_args=["-O2", "-ffp-contract=off"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
