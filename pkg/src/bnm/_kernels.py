"""Kernel selection for the Jacobi SVD.

The compiled kernel is used when importable; set ``BNM_PURE_PYTHON=1`` to
force the numpy fallback.
"""
import os

from bnm import _jacobi_py

try:
    from bnm import _jacobi as _compiled
except ImportError:  # extension not built
    _compiled = None

KERNELS = {"python": _jacobi_py.jacobi_sweeps}
if _compiled is not None:
    KERNELS["compiled"] = _compiled.jacobi_sweeps

if _compiled is not None and not os.environ.get("BNM_PURE_PYTHON"):
    DEFAULT_KERNEL = "compiled"
else:
    DEFAULT_KERNEL = "python"


def get_kernel(name=None):
    name = DEFAULT_KERNEL if name is None else name
    try:
        return KERNELS[name]
    except KeyError:
        raise ValueError(f"unknown or unavailable Jacobi kernel {name!r}; "
                         f"available: {sorted(KERNELS)}") from None
