"""Select the kernel implementation at import time.

The compiled ``_ckernels`` extension is preferred; setting the environment
variable ``CARLASEG_PURE_PYTHON=1`` (or a failed build) selects ``_pykernels``.
"""

import os

from . import _pykernels

python_kernels = _pykernels

try:
    from . import _ckernels as compiled_kernels
except ImportError:  # extension not built
    compiled_kernels = None

if compiled_kernels is not None and not os.environ.get("CARLASEG_PURE_PYTHON"):
    kernels = compiled_kernels
    NAME = "cython"
else:
    kernels = _pykernels
    NAME = "python"


def get_kernels(name: str | None = None):
    """Kernel module by name (``"cython"``/``"python"``); ``None`` gives the active one."""
    if name is None:
        return kernels
    if name == "python":
        return _pykernels
    if name == "cython":
        if compiled_kernels is None:
            raise RuntimeError("compiled kernels are not available; rebuild the package")
        return compiled_kernels
    raise ValueError(f"unknown kernel backend {name!r}")
