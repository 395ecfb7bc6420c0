"""Build shim: compiles the optional native core when Cython and a C
toolchain are available.  `ELLIPSIS_AUDIT_NO_EXT=1` (or a missing Cython)
skips the extension; the package then runs on the pure-Python engine.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("ELLIPSIS_AUDIT_NO_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "ellipsis_audit._core",
                    ["src/ellipsis_audit/_core.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level=3,
        )

setup(ext_modules=ext_modules)
