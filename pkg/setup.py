from setuptools import Extension, setup

import numpy as np

# The compiled event kernels are optional: if Cython (or a C compiler) is
# missing the package installs pure-Python and evalign._kernels falls back
# to the numpy implementation at import time.
try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "evalign._kernels._voxel_cy",
                ["src/evalign/_kernels/_voxel_cy.pyx"],
                include_dirs=[np.get_include()],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
