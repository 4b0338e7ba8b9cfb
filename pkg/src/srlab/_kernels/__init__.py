"""Kernel backend selection.

The compiled core (``srlab._kernels._core``) is preferred when built;
otherwise the numpy fallback is used. Override with SRLAB_BACKEND=numpy
or SRLAB_BACKEND=cython (the latter raises if the extension is missing).
"""

import os

from . import numpy_backend

_requested = os.environ.get("SRLAB_BACKEND", "auto").strip().lower()

if _requested in ("auto", ""):
    try:
        from . import _core as _impl
    except ImportError:
        _impl = numpy_backend
elif _requested == "cython":
    from . import _core as _impl
elif _requested in ("numpy", "python"):
    _impl = numpy_backend
else:
    raise ValueError(
        f"unknown SRLAB_BACKEND {_requested!r}; expected auto, cython or numpy"
    )

BACKEND = _impl.NAME

relu_fwd = _impl.relu_fwd
relu_bwd = _impl.relu_bwd
softmax_tau_fwd = _impl.softmax_tau_fwd
softmax_tau_bwd = _impl.softmax_tau_bwd
l2norm_rows_fwd = _impl.l2norm_rows_fwd
l2norm_rows_bwd = _impl.l2norm_rows_bwd
log_fwd = _impl.log_fwd
log_bwd = _impl.log_bwd
pow_fwd = _impl.pow_fwd
pow_bwd = _impl.pow_bwd
