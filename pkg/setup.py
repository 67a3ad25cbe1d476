"""Builds the optional compiled episode kernel.

If Cython or a C compiler is missing the package still installs and runs on
the NumPy fallback.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("PGG_EVO_NO_EXT") != "1":
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
                    "pgg_evo._kernels",
                    ["src/pgg_evo/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    # no fused multiply-add so results match the NumPy loop bit for bit
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
