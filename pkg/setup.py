import os

import numpy as np
from setuptools import Extension, setup

# LPGCN_NO_EXT=1 builds a pure-Python install; the package then runs on its fallback kernels.
ext_modules = []
if not os.environ.get("LPGCN_NO_EXT"):
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "lpgcn._ckernels",
                ["src/lpgcn/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
