"""Kernel backend selection.

The compiled extension is preferred; the pure-Python twin is used when the
extension is unavailable or when CTMGSOLVE_PURE_PYTHON=1 is set.  Both expose
the same kernel functions and produce bit-identical results.
"""

from __future__ import annotations

import os

from . import _kernel_py

if os.environ.get("CTMGSOLVE_PURE_PYTHON") == "1":
    _impl = _kernel_py
else:
    try:
        from . import _kernel_c as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernel_py


def active_backend() -> str:
    """Name of the kernel backend in use: 'compiled' or 'python'."""
    return _impl.BACKEND


def get_kernels(name: str | None = None):
    """Kernel module by name (None = active, 'python', 'compiled')."""
    if name is None:
        return _impl
    if name == "python":
        return _kernel_py
    if name == "compiled":
        from . import _kernel_c

        return _kernel_c
    raise ValueError(f"unknown backend {name!r}")


solve_kernel = _impl.solve_kernel
evaluate_kernel = _impl.evaluate_kernel
simulate_kernel = _impl.simulate_kernel
