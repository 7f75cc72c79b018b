"""Build script: compiles the optional Cython kernels.

The package is fully functional without the extension (a numpy fallback is
selected at import); building it just makes the hot loops fast.  If Cython
or a C compiler is missing we install pure-python only.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    ext_modules = cythonize(
        [
            Extension(
                "varistrat._kernels._impl",
                ["src/varistrat/_kernels/_impl.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
