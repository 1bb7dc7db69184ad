"""Extension build for the valet package.

The C++ core is compiled straight into the extension (no intermediate
static library) so `pip install .` needs nothing beyond a C++20 compiler,
zlib, and pybind11.  The CMake build produces the same module for the test
tree; this file exists so the package is pip-installable on its own.
"""

import glob

from pybind11.setup_helpers import Pybind11Extension, build_ext
from setuptools import setup

ext = Pybind11Extension(
    "valet._valet",
    sources=sorted(glob.glob("src/*.cpp")) + ["python/bindings.cpp"],
    include_dirs=["include", "vendor"],
    libraries=["z"],
    cxx_std=20,
)

setup(
    packages=["valet"],
    package_dir={"": "python"},
    ext_modules=[ext],
    cmdclass={"build_ext": build_ext},
)
