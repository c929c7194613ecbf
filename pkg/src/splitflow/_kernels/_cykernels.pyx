# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernel backend.

Elementwise kernels reproduce the numpy fallback bit-for-bit (one rounding
per multiply and per add, no FMA thanks to -ffp-contract=off, and matching
signed-zero behavior). The reductions use a straight loop, which can differ
from BLAS in the last ulp.
"""

from libc.math cimport fabs, sqrt

import numpy as np

BACKEND = "compiled"


def dot(const double[::1] a, const double[::1] b):
    cdef Py_ssize_t i, n = a.shape[0]
    cdef double s = 0.0
    for i in range(n):
        s += a[i] * b[i]
    return s


def nrm2(const double[::1] a):
    cdef Py_ssize_t i, n = a.shape[0]
    cdef double s = 0.0
    for i in range(n):
        s += a[i] * a[i]
    return sqrt(s)


def axpy(double alpha, const double[::1] a, const double[::1] b):
    """alpha*a + b, new array."""
    cdef Py_ssize_t i, n = a.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    for i in range(n):
        out[i] = alpha * a[i] + b[i]
    return out_arr


def combine(double alpha, const double[::1] a, double beta, const double[::1] b):
    """alpha*a + beta*b, new array."""
    cdef Py_ssize_t i, n = a.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    for i in range(n):
        out[i] = alpha * a[i] + beta * b[i]
    return out_arr


def soft_threshold(const double[::1] w, double kappa):
    """Componentwise sign(w)*max(|w|-kappa, 0), new array."""
    cdef Py_ssize_t i, n = w.shape[0]
    cdef double v
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    for i in range(n):
        v = fabs(w[i]) - kappa
        if v < 0.0:
            v = 0.0
        if w[i] > 0.0:
            out[i] = v
        elif w[i] < 0.0:
            out[i] = -v
        else:
            out[i] = 0.0
    return out_arr


def clamp(const double[::1] w, const double[::1] lo, const double[::1] hi):
    """Componentwise min(max(w, lo), hi), new array."""
    cdef Py_ssize_t i, n = w.shape[0]
    cdef double t
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    for i in range(n):
        t = w[i] if w[i] > lo[i] else lo[i]
        out[i] = t if t < hi[i] else hi[i]
    return out_arr
