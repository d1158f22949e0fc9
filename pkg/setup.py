"""Build script: compiles the optional t-SNE kernel extension.

The package works without the extension (a NumPy fallback is selected at
import time), so a failed compile downgrades to a pure-Python install
instead of aborting.
"""

from setuptools import setup
from setuptools.command.build_ext import build_ext
from setuptools.errors import CCompilerError, ExecError, PlatformError


class optional_build_ext(build_ext):
    def run(self):
        try:
            super().run()
        except (CCompilerError, ExecError, PlatformError, FileNotFoundError):
            print("t-SNE kernel extension build failed; using pure-Python fallback")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except (CCompilerError, ExecError, PlatformError, FileNotFoundError):
            print(f"skipping extension {ext.name}; pure-Python fallback will be used")


def extensions():
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools.extension import Extension
    except ImportError:
        return []
    ext = Extension(
        "drtune._tsne_kernels",
        ["src/drtune/_tsne_kernels.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], language_level=3)


setup(ext_modules=extensions(), cmdclass={"build_ext": optional_build_ext})
