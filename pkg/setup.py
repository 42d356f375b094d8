import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("PSLAB_PURE_PYTHON"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext = Extension(
            "pslab.lp._simplex",
            ["src/pslab/lp/_simplex.pyx"],
            # keep mul/sub separate so the kernel matches the numpy fallback bit for bit
            extra_compile_args=["-O3", "-ffp-contract=off"],
        )
        ext_modules = cythonize([ext], language_level=3)

setup(ext_modules=ext_modules)
