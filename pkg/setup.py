import os

from setuptools import Extension, setup

# The timing engine has a compiled (Cython) core with a pure-Python twin.
# If Cython or a C compiler is unavailable the build degrades gracefully and
# the package falls back to the Python engine at import time.
PYX = "src/gnndataflow/sim/_engine_cy.pyx"

ext_modules = []
if os.environ.get("GNNDATAFLOW_NO_EXT") != "1" and os.path.exists(PYX):
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "gnndataflow.sim._engine_cy",
                    [PYX],
                    extra_compile_args=["-O3"],
                    optional=True,
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
