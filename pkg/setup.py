"""Builds the optional compiled kernel extension.

The package still installs when Cython or a C compiler is missing; the
numpy fallback kernels are used in that case.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("PERRON_NO_EXT") != "1":
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
                    "perron._kernels",
                    ["src/perron/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    # no fast-math and no FMA contraction: the chain kernels
                    # must round exactly like the numpy fallback
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
