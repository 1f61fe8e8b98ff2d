import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "annealed_grg.simulate._ckernels",
        ["src/annealed_grg/simulate/_ckernels.pyx"],
        include_dirs=[np.get_include()],
        language="c++",
        # no fused multiply-add: results must match the Python kernel bit for bit
        extra_compile_args=["-O2", "-ffp-contract=off", "-fno-fast-math"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        optional=True,
    )
]

setup(ext_modules=cythonize(extensions, compiler_directives={"language_level": "3"}))
