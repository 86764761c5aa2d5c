"""Build script: compiles the optional scan kernel extension.

The package runs without the extension (a numpy fallback is selected at
import time), so any failure here only means a slower install.
`-ffp-contract=off` keeps the compiled kernel bit-identical to the numpy
backend; do not add -ffast-math.
"""

from setuptools import setup

try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    extensions = cythonize(
        [
            Extension(
                "grouplearn._scan",
                ["src/grouplearn/_scan.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3", "-ffp-contract=off"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
