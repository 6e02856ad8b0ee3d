"""Build script for the optional compiled kernel extension.

The package works without it: when the extension cannot be built (no
compiler, no Cython, no scipy headers), installation proceeds and the
pure-numpy backend in chainex.kernels.reference is used at runtime.
"""

import warnings

from setuptools import setup
from setuptools.command.build_ext import build_ext


def _extensions():
    try:
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError as exc:
        warnings.warn(f"compiled kernels disabled ({exc}); using the numpy backend")
        return []
    ext = Extension(
        "chainex.kernels._ckernels",
        ["src/chainex/kernels/_ckernels.pyx"],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


class OptionalBuildExt(build_ext):
    """build_ext that downgrades compile failures to a warning."""

    def run(self):
        try:
            super().run()
        except Exception as exc:
            warnings.warn(f"compiled kernels disabled ({exc}); using the numpy backend")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            warnings.warn(f"failed to build {ext.name} ({exc}); using the numpy backend")


setup(ext_modules=_extensions(), cmdclass={"build_ext": OptionalBuildExt})
