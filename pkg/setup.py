"""Build script: compiles the raycast kernel when Cython is available.

The package works without the extension (a pure-Python kernel is selected at
import time), so any build failure here downgrades to the fallback instead of
breaking the install.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("pivnav._raycast_cy", ["src/pivnav/_raycast_cy.pyx"])],
        language_level=3,
    )
except Exception as exc:  # missing Cython / compiler: fall back to pure Python
    print(f"skipping compiled raycast kernel: {exc}")

setup(ext_modules=ext_modules)
