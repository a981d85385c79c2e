"""Builds the optional compiled CQT kernel.

The package works without the extension: palmsonic.cqt falls back to the
numpy backend when the import fails. A plain `pip install .` compiles it;
`python setup.py build_ext --inplace` is enough for a source checkout.
"""

import numpy
from setuptools import setup
from setuptools.extension import Extension

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = []
if cythonize is not None:
    extensions = cythonize(
        [
            Extension(
                "palmsonic._cqtcore",
                sources=["src/palmsonic/_cqtcore.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )

setup(ext_modules=extensions)
