"""Build script: compiles the optional accelerator extension when Cython and a
C compiler are available, otherwise installs the pure-Python package unchanged
(the runtime falls back to neckstrain._kernels_py automatically).

Build in place for development:  python setup.py build_ext --inplace
Skip the extension entirely:     NECKSTRAIN_PURE_PYTHON=1 pip install -e .
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("NECKSTRAIN_PURE_PYTHON") != "1":
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "neckstrain._kernels",
                    ["src/neckstrain/_kernels.pyx"],
                    include_dirs=[numpy.get_include()],
                    # -ffast-math is deliberately NOT used: the compiled and
                    # pure-Python backends must produce bit-identical floats.
                    extra_compile_args=["-O2"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level="3",
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
