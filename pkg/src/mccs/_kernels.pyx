# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: one D4 filter-bank level and elementwise prox maps.

Arithmetic mirrors ``_kernels_py`` expression for expression; the extension
is compiled with -ffp-contract=off so both backends produce the same bits
for the filter-bank kernels.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

cdef double _SQRT2 = sqrt(2.0)
cdef double _SQRT3 = sqrt(3.0)
cdef double _H0 = (1.0 + _SQRT3) / (4.0 * _SQRT2)
cdef double _H1 = (3.0 + _SQRT3) / (4.0 * _SQRT2)
cdef double _H2 = (3.0 - _SQRT3) / (4.0 * _SQRT2)
cdef double _H3 = (1.0 - _SQRT3) / (4.0 * _SQRT2)


def d4_analyze(double complex[:, ::1] a):
    """One D4 analysis level along the last axis with periodic wrap."""
    cdef Py_ssize_t m = a.shape[0]
    cdef Py_ssize_t n = a.shape[1]
    cdef Py_ssize_t half = n // 2
    out_arr = np.empty((m, n), dtype=np.complex128)
    cdef double complex[:, ::1] out = out_arr
    cdef Py_ssize_t i, k, j0
    cdef double complex x0, x1, x2, x3
    for i in range(m):
        for k in range(half):
            j0 = 2 * k
            x0 = a[i, j0]
            x1 = a[i, j0 + 1]
            x2 = a[i, (j0 + 2) % n]
            x3 = a[i, (j0 + 3) % n]
            out[i, k] = _H0 * x0 + _H1 * x1 + _H2 * x2 + _H3 * x3
            out[i, half + k] = _H3 * x0 - _H2 * x1 + _H1 * x2 - _H0 * x3
    return out_arr


def d4_synthesize(double complex[:, ::1] a):
    """Exact inverse (transpose) of d4_analyze."""
    cdef Py_ssize_t m = a.shape[0]
    cdef Py_ssize_t n = a.shape[1]
    cdef Py_ssize_t half = n // 2
    out_arr = np.empty((m, n), dtype=np.complex128)
    cdef double complex[:, ::1] out = out_arr
    cdef Py_ssize_t i, k, kp
    cdef double complex lo, hi, lo_prev, hi_prev
    for i in range(m):
        for k in range(half):
            kp = (k + half - 1) % half  # cdivision: keep the dividend nonnegative
            lo = a[i, k]
            hi = a[i, half + k]
            lo_prev = a[i, kp]
            hi_prev = a[i, half + kp]
            out[i, 2 * k] = _H0 * lo + _H2 * lo_prev + _H3 * hi + _H1 * hi_prev
            out[i, 2 * k + 1] = _H1 * lo + _H3 * lo_prev - _H2 * hi - _H0 * hi_prev
    return out_arr


def soft_threshold(double complex[::1] v, double t):
    """Complex soft threshold: shrink magnitudes by t, keep phases."""
    cdef Py_ssize_t n = v.shape[0]
    out_arr = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] out = out_arr
    cdef Py_ssize_t i
    cdef double mag
    for i in range(n):
        mag = abs(v[i])
        if mag > t:
            out[i] = v[i] * ((mag - t) / mag)
        else:
            out[i] = 0.0
    return out_arr


def clip_unit_disk(double complex[::1] v):
    """Project each entry onto the closed complex unit disk."""
    cdef Py_ssize_t n = v.shape[0]
    out_arr = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] out = out_arr
    cdef Py_ssize_t i
    cdef double mag
    for i in range(n):
        mag = abs(v[i])
        if mag > 1.0:
            out[i] = v[i] * (1.0 / mag)
        else:
            out[i] = v[i]
    return out_arr
