"""Build script for the optional compiled kernel core.

The package is fully functional without the extension (a numpy fallback is
selected at import time); the Cython module exists to keep the 1 kHz servo
loop well under its per-tick budget.
"""

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Build the extension if a toolchain is present, otherwise skip it."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # missing compiler: pure-python install
            print(f"warning: skipping compiled kernels ({exc})")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: skipping {ext.name} ({exc})")


def _ext_modules():
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "palpatron._kernels._corekernels",
        sources=["src/palpatron/_kernels/_corekernels.pyx"],
        # -ffp-contract=off: the numpy fallback must produce bit-identical
        # doubles, so FMA contraction is disabled on purpose.
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(
    ext_modules=_ext_modules(),
    cmdclass={"build_ext": OptionalBuildExt},
)
