import sys

from setuptools import Extension, setup

extensions = []
try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "ltllearn._speedups",
                ["src/ltllearn/_speedups.pyx"],
                language="c++",
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except Exception as exc:  # no Cython / no compiler: install pure-Python only
    print(f"warning: building without compiled core ({exc})", file=sys.stderr)

setup(ext_modules=extensions)
