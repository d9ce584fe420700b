"""Selects the per-observation kernel backend at import time.

The compiled extension is preferred; the numpy implementation is the
fallback when the extension was not built.  Set ``QTENSOR_PURE_PYTHON=1``
to force the numpy kernels regardless.
"""

from __future__ import annotations

import os

if os.environ.get("QTENSOR_PURE_PYTHON"):
    from . import _obsloops_np as _impl
else:
    try:
        from . import _obsloops as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _obsloops_np as _impl

BACKEND = _impl.BACKEND
nll = _impl.nll
dneg_log_f = _impl.dneg_log_f
boundary_grad = _impl.boundary_grad


def backend_name() -> str:
    """Name of the active kernel backend: ``"cython"`` or ``"numpy"``."""
    return BACKEND
