import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

# -ffp-contract=off keeps the C kernels bit-identical to the pure-Python
# fallback (no FMA contraction); do not add -ffast-math.
extensions = [
    Extension(
        "ctmgsolve._kernel_c",
        ["src/ctmgsolve/_kernel_c.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={"language_level": "3", "boundscheck": False, "wraparound": False},
    )
)
