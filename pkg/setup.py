import os

from setuptools import Extension, setup

try:
    import numpy as np
    from Cython.Build import cythonize

    USE_CYTHON = os.environ.get("SAFERECOVERY_NO_EXT", "") == ""
except ImportError:
    USE_CYTHON = False

ext_modules = []
if USE_CYTHON:
    ext_modules = cythonize(
        [
            Extension(
                "saferecovery._ckernel",
                ["src/saferecovery/_ckernel.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
