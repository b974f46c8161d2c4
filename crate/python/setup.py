"""Build glue: compile the Rust extension with cargo and ship the cdylib.

The extension has no C sources; ``build_ext`` shells out to cargo for the
release build of the binding crate and copies the resulting shared library
to wherever setuptools expects the module (build dir for wheels, the source
tree for editable installs).
"""

import shutil
import subprocess
from pathlib import Path

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext

WORKSPACE_ROOT = Path(__file__).resolve().parent.parent


class CargoBuildExt(build_ext):
    def run(self):
        subprocess.run(
            ["cargo", "build", "--release", "-p", "poisonlab-py"],
            cwd=WORKSPACE_ROOT,
            check=True,
        )
        built = WORKSPACE_ROOT / "target" / "release" / "lib_poisonlab.so"
        if not built.exists():
            raise FileNotFoundError(f"cargo did not produce {built}")
        for ext in self.extensions:
            dest = Path(self.get_ext_fullpath(ext.name))
            dest.parent.mkdir(parents=True, exist_ok=True)
            shutil.copy2(built, dest)


setup(
    ext_modules=[Extension("poisonlab._poisonlab", sources=[])],
    cmdclass={"build_ext": CargoBuildExt},
)
