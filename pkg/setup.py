"""Build script for the optional compiled kernels.

The Cython extension is skipped when Cython or a C compiler is unavailable;
the package then runs on the numpy fallback in ``nngf._pykernels``.
"""
from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "nngf._ckernels",
                ["src/nngf/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
