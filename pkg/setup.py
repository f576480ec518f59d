import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = [
    Extension(
        "dirfilt.nn._kernels",
        ["src/dirfilt/nn/_kernels.pyx"],
        include_dirs=[np.get_include(), "src/dirfilt/nn"],
        # fast-math at compile time only: it lets the simd gate loops emit
        # libmvec exp/tanh calls, and keeping it off the link line avoids
        # installing process-wide flush-to-zero at import
        extra_compile_args=["-O3", "-march=native", "-ffast-math", "-fopenmp-simd"],
        extra_link_args=["-lm"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        depends=["src/dirfilt/nn/_kernel_steps.h"],
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "initializedcheck": False,
            "cdivision": True,
        },
    )
    if cythonize is not None
    else [],
)
