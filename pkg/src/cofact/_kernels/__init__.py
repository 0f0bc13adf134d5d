"""Observation-loop kernels with a compiled core and a numpy fallback.

The compiled Cython extension is preferred when it imported successfully;
set ``COFACT_KERNELS=python`` or ``COFACT_KERNELS=compiled`` to force a
backend (the latter raises if the extension is unavailable).  The active
backend name is exposed as ``BACKEND``.
"""

import os

from . import _pyimpl

_requested = os.environ.get("COFACT_KERNELS", "auto").lower()
if _requested not in ("auto", "compiled", "python"):
    raise RuntimeError(f"COFACT_KERNELS must be auto/compiled/python, got {_requested!r}")

_impl = None
if _requested in ("auto", "compiled"):
    try:
        from . import _speedups as _impl
    except ImportError:
        if _requested == "compiled":
            raise
if _impl is None:
    _impl = _pyimpl

BACKEND = "python" if _impl is _pyimpl else "compiled"

pair_dot = _impl.pair_dot
scatter_add = _impl.scatter_add
logistic_value = _impl.logistic_value
logistic_grad = _impl.logistic_grad
laplace_value = _impl.laplace_value
laplace_grad = _impl.laplace_grad
quadratic_value = _impl.quadratic_value
quadratic_grad = _impl.quadratic_grad


def backends():
    """Mapping of available backend name -> module (for tests/benchmarks)."""
    table = {"python": _pyimpl}
    try:
        from . import _speedups

        table["compiled"] = _speedups
    except ImportError:
        pass
    return table
