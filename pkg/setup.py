"""Build script: compiles the optional speedup extension.

Set RAGMARK_SKIP_EXT=1 to build a pure-Python wheel (the package falls
back to ragmark._kernels._pure at import time when the compiled module
is absent).
"""

import os

from setuptools import Extension, setup

extensions = [
    Extension(
        "ragmark._kernels._speedups",
        ["src/ragmark/_kernels/_speedups.pyx"],
        extra_compile_args=["-O3"],
    )
]

if os.environ.get("RAGMARK_SKIP_EXT"):
    ext_modules = []
else:
    from Cython.Build import cythonize

    ext_modules = cythonize(extensions, compiler_directives={"language_level": "3"})

setup(ext_modules=ext_modules)
