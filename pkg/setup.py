import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

common = dict(
    include_dirs=[np.get_include()],
    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
)

extensions = [
    Extension("mvbayes._kernels", ["src/mvbayes/_kernels.pyx"], extra_compile_args=["-O3"], **common),
    # only the grid search tolerates reassociation; the recursions stay IEEE-exact
    Extension("mvbayes._grid", ["src/mvbayes/_grid.pyx"], extra_compile_args=["-O3", "-ffast-math"], **common),
]

setup(ext_modules=cythonize(extensions, language_level=3))
