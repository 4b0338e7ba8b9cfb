"""Pure-numpy implementations of the hot row-wise kernels.

Reference semantics for the compiled core in ``_core.pyx``: both backends
must agree to floating-point noise on every function below. All inputs are
C-contiguous float64 2-D arrays; outputs are freshly allocated.
"""

import numpy as np

NAME = "numpy"


def relu_fwd(x):
    return np.maximum(x, 0.0)


def relu_bwd(x, dy):
    return np.where(x > 0.0, dy, 0.0)


def softmax_tau_fwd(z, tau):
    """Row-wise softmax of z/tau with max subtraction for stability."""
    shifted = (z - z.max(axis=1, keepdims=True)) / tau
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax_tau_bwd(p, dp, tau):
    # dz_j = p_j * (dp_j - sum_i dp_i p_i) / tau
    inner = (dp * p).sum(axis=1, keepdims=True)
    return p * (dp - inner) / tau


def l2norm_rows_fwd(z, eps):
    """Scale each row to unit Euclidean norm; rows with norm < eps pass through."""
    norms = np.sqrt((z * z).sum(axis=1, keepdims=True))
    safe = norms >= eps
    return np.where(safe, z / np.where(safe, norms, 1.0), z), norms[:, 0].copy()


def l2norm_rows_bwd(y, norms, dy, eps):
    # normalized rows: dz = (dy - y <y, dy>) / norm; degenerate rows are identity
    inner = (dy * y).sum(axis=1, keepdims=True)
    n = norms[:, None]
    safe = n >= eps
    return np.where(safe, (dy - y * inner) / np.where(safe, n, 1.0), dy)


def log_fwd(u, floor):
    return np.log(np.maximum(u, floor))


def log_bwd(u, dy, floor):
    return np.where(u > floor, dy / np.maximum(u, floor), 0.0)


def pow_fwd(u, exponent, floor):
    return np.power(np.maximum(u, floor), exponent)


def pow_bwd(u, dy, exponent, floor):
    uc = np.maximum(u, floor)
    return np.where(u > floor, exponent * np.power(uc, exponent - 1.0) * dy, 0.0)
