# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the loops in ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport atan2, cos, sin, sqrt, fabs, INFINITY

cnp.import_array()


def segment_angles(values, point=0j):
    cdef double complex[::1] v = np.ascontiguousarray(values, dtype=np.complex128)
    cdef Py_ssize_t n = v.shape[0], i
    cdef double pr = point.real, pi = point.imag
    cdef double ar, ai, br, bi
    out = np.empty(max(n - 1, 0), dtype=np.float64)
    cdef double[::1] o = out
    if n < 2:
        return out
    ar = v[0].real - pr
    ai = v[0].imag - pi
    for i in range(1, n):
        br = v[i].real - pr
        bi = v[i].imag - pi
        o[i - 1] = atan2(ar * bi - ai * br, ar * br + ai * bi)
        ar = br
        ai = bi
    return out


def winding_stats(values, point=0j):
    cdef double complex[::1] v = np.ascontiguousarray(values, dtype=np.complex128)
    cdef Py_ssize_t n = v.shape[0], i
    cdef double pr = point.real, pi = point.imag
    cdef double ar, ai, br, bi, a, total = 0.0, amax = 0.0, d, dmin = INFINITY
    if n == 0:
        return 0.0, 0.0, INFINITY
    ar = v[0].real - pr
    ai = v[0].imag - pi
    dmin = sqrt(ar * ar + ai * ai)
    for i in range(1, n):
        br = v[i].real - pr
        bi = v[i].imag - pi
        a = atan2(ar * bi - ai * br, ar * br + ai * bi)
        total += a
        if fabs(a) > amax:
            amax = fabs(a)
        d = sqrt(br * br + bi * bi)
        if d < dmin:
            dmin = d
        ar = br
        ai = bi
    return total, amax, dmin


def symmetric_critical(omega, plant, double k, double tau):
    cdef double[::1] w = np.ascontiguousarray(omega, dtype=np.float64)
    cdef double complex[::1] p = np.ascontiguousarray(plant, dtype=np.complex128)
    cdef Py_ssize_t n = w.shape[0], i
    out = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] o = out
    cdef double c, s, ph
    for i in range(n):
        ph = w[i] * tau
        c = k * cos(ph)
        s = k * sin(ph)
        o[i] = (1.0 + c * p[i].real - s * p[i].imag) + 1j * (c * p[i].imag + s * p[i].real)
    return out


def general_critical(rate_plus, rate_minus, A, B, P, double k, double lf):
    cdef double[::1] rp = np.ascontiguousarray(rate_plus, dtype=np.float64)
    cdef double[::1] rm = np.ascontiguousarray(rate_minus, dtype=np.float64)
    cdef double complex[::1] a = np.ascontiguousarray(A, dtype=np.complex128)
    cdef double complex[::1] b = np.ascontiguousarray(B, dtype=np.complex128)
    cdef double complex[::1] pp = np.ascontiguousarray(P, dtype=np.complex128)
    cdef Py_ssize_t n = rp.shape[0], i
    out = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] o = out
    cdef double complex ep, em, x, y
    cdef double k2 = k * k
    for i in range(n):
        ep = cos(rp[i] * lf) + 1j * sin(rp[i] * lf)
        em = cos(rm[i] * lf) + 1j * sin(rm[i] * lf)
        x = 1.0 + k * ep * a[i]
        y = 1.0 + k * em * b[i]
        o[i] = x * y - k2 * ep * em * pp[i]
    return out
