# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled row-wise kernels.

Same contract as ``numpy_backend``; single fused pass per row, no
temporaries. Inputs must be C-contiguous float64 2-D arrays.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log, pow as cpow, sqrt

cnp.import_array()

NAME = "cython"


def relu_fwd(double[:, ::1] x):
    cdef Py_ssize_t n = x.shape[0], k = x.shape[1], i, j
    out = np.empty((n, k))
    cdef double[:, ::1] y = out
    for i in range(n):
        for j in range(k):
            y[i, j] = x[i, j] if x[i, j] > 0.0 else 0.0
    return out


def relu_bwd(double[:, ::1] x, double[:, ::1] dy):
    cdef Py_ssize_t n = x.shape[0], k = x.shape[1], i, j
    out = np.empty((n, k))
    cdef double[:, ::1] dx = out
    for i in range(n):
        for j in range(k):
            dx[i, j] = dy[i, j] if x[i, j] > 0.0 else 0.0
    return out


def softmax_tau_fwd(double[:, ::1] z, double tau):
    cdef Py_ssize_t n = z.shape[0], k = z.shape[1], i, j
    out = np.empty((n, k))
    cdef double[:, ::1] p = out
    cdef double m, s
    for i in range(n):
        m = z[i, 0]
        for j in range(1, k):
            if z[i, j] > m:
                m = z[i, j]
        s = 0.0
        for j in range(k):
            p[i, j] = exp((z[i, j] - m) / tau)
            s += p[i, j]
        for j in range(k):
            p[i, j] /= s
    return out


def softmax_tau_bwd(double[:, ::1] p, double[:, ::1] dp, double tau):
    cdef Py_ssize_t n = p.shape[0], k = p.shape[1], i, j
    out = np.empty((n, k))
    cdef double[:, ::1] dz = out
    cdef double inner
    for i in range(n):
        inner = 0.0
        for j in range(k):
            inner += dp[i, j] * p[i, j]
        for j in range(k):
            dz[i, j] = p[i, j] * (dp[i, j] - inner) / tau
    return out


def l2norm_rows_fwd(double[:, ::1] z, double eps):
    cdef Py_ssize_t n = z.shape[0], k = z.shape[1], i, j
    out = np.empty((n, k))
    norms_out = np.empty(n)
    cdef double[:, ::1] y = out
    cdef double[::1] norms = norms_out
    cdef double s
    for i in range(n):
        s = 0.0
        for j in range(k):
            s += z[i, j] * z[i, j]
        s = sqrt(s)
        norms[i] = s
        if s >= eps:
            for j in range(k):
                y[i, j] = z[i, j] / s
        else:
            for j in range(k):
                y[i, j] = z[i, j]
    return out, norms_out


def l2norm_rows_bwd(double[:, ::1] y, double[::1] norms, double[:, ::1] dy,
                    double eps):
    cdef Py_ssize_t n = y.shape[0], k = y.shape[1], i, j
    out = np.empty((n, k))
    cdef double[:, ::1] dz = out
    cdef double inner
    for i in range(n):
        if norms[i] >= eps:
            inner = 0.0
            for j in range(k):
                inner += dy[i, j] * y[i, j]
            for j in range(k):
                dz[i, j] = (dy[i, j] - y[i, j] * inner) / norms[i]
        else:
            for j in range(k):
                dz[i, j] = dy[i, j]
    return out


def log_fwd(double[:, ::1] u, double floor):
    cdef Py_ssize_t n = u.shape[0], k = u.shape[1], i, j
    out = np.empty((n, k))
    cdef double[:, ::1] y = out
    for i in range(n):
        for j in range(k):
            y[i, j] = log(u[i, j] if u[i, j] > floor else floor)
    return out


def log_bwd(double[:, ::1] u, double[:, ::1] dy, double floor):
    cdef Py_ssize_t n = u.shape[0], k = u.shape[1], i, j
    out = np.empty((n, k))
    cdef double[:, ::1] du = out
    for i in range(n):
        for j in range(k):
            du[i, j] = dy[i, j] / u[i, j] if u[i, j] > floor else 0.0
    return out


def pow_fwd(double[:, ::1] u, double exponent, double floor):
    cdef Py_ssize_t n = u.shape[0], k = u.shape[1], i, j
    out = np.empty((n, k))
    cdef double[:, ::1] y = out
    for i in range(n):
        for j in range(k):
            y[i, j] = cpow(u[i, j] if u[i, j] > floor else floor, exponent)
    return out


def pow_bwd(double[:, ::1] u, double[:, ::1] dy, double exponent, double floor):
    cdef Py_ssize_t n = u.shape[0], k = u.shape[1], i, j
    out = np.empty((n, k))
    cdef double[:, ::1] du = out
    for i in range(n):
        for j in range(k):
            if u[i, j] > floor:
                du[i, j] = exponent * cpow(u[i, j], exponent - 1.0) * dy[i, j]
            else:
                du[i, j] = 0.0
    return out
