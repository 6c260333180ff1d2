"""Build the optional compiled kernels.

The package works without them: ``gqcopt._backend`` falls back to the numpy
implementations in ``gqcopt._kernels_py`` when the extension is missing.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("GQCOPT_NO_EXTENSION"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "gqcopt._kernels",
                    ["src/gqcopt/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
                "initializedcheck": False,
            },
        )

setup(ext_modules=ext_modules)
