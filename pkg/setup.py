from setuptools import Extension, setup

# The compiled core is optional: if Cython (or a C compiler) is missing the
# package installs anyway and falls back to the pure-NumPy implementation.
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "frackac._core",
                ["src/frackac/_core.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level="3",
    )
except Exception:
    ext_modules = []

setup(ext_modules=ext_modules)
