"""Build the optional compiled kernel extension.

The package works without it (a numpy fallback is selected at import time),
so a failing C toolchain downgrades the install instead of breaking it.
"""

import os

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing or broken
            print(f"warning: compiled kernels skipped ({exc}); using numpy fallback")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: building {ext.name} failed ({exc}); using numpy fallback")


def extensions():
    if os.environ.get("PINCHMD_NO_EXT"):
        return []
    from Cython.Build import cythonize

    ext = Extension(
        "pinchmd.engine._kernels_cy",
        ["src/pinchmd/engine/_kernels_cy.pyx"],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], language_level=3)


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
