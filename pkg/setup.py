"""Build script for the optional Cython kernels.

If Cython or a C compiler is missing the package still installs; the
pure-Python fallback in privalog._kernels_py is then used at run time.
"""

import os
import sys

from setuptools import setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Build the extension if possible; otherwise warn and carry on."""

    def run(self):
        try:
            super().run()
        except Exception as e:  # no compiler, missing headers, ...
            self._skip(e)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as e:
            self._skip(e)

    @staticmethod
    def _skip(e):
        print(f"warning: privalog._kernels not built ({e}); using the pure-Python kernels",
              file=sys.stderr)


ext_modules = []
if not os.environ.get("PRIVALOG_NO_EXT"):
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
                    "privalog._kernels",
                    ["src/privalog/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O2", "-fno-fast-math", "-ffp-contract=off"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules, cmdclass={"build_ext": optional_build_ext})
