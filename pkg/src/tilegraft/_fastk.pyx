# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled histogram hot kernels.

Mirrors tilegraft._np_kernels exactly (same signatures and conventions);
see that module's docstring for the math.  Loops stream per sample, so peak
memory is O(B) regardless of image size.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs

cnp.import_array()


cdef inline double _sigmoid(double z) nogil:
    cdef double e
    if z >= 0.0:
        return 1.0 / (1.0 + exp(-z))
    e = exp(z)
    return e / (1.0 + e)


cdef inline double _dsigmoid(double z) nogil:
    cdef double s = _sigmoid(z)
    return s * (1.0 - s)


def mass_logistic(cnp.ndarray[cnp.float64_t, ndim=1] samples, int bins, double tau):
    cdef Py_ssize_t n = samples.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.zeros(bins, dtype=np.float64)
    cdef double[:] ov = out
    cdef double[:] sv = samples
    cdef double inv_b = 1.0 / bins
    cdef double y, prev, cur
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(n):
            y = sv[i]
            prev = _sigmoid(y / tau)
            for j in range(bins):
                cur = _sigmoid((y - (j + 1) * inv_b) / tau)
                ov[j] += prev - cur
                prev = cur
    out /= n
    return out


def mass_triangular(cnp.ndarray[cnp.float64_t, ndim=1] samples, int bins, double tau):
    cdef Py_ssize_t n = samples.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.zeros(bins, dtype=np.float64)
    cdef double[:] ov = out
    cdef double[:] sv = samples
    cdef double y, c, w
    cdef Py_ssize_t i, j, lo, hi
    with nogil:
        for i in range(n):
            y = sv[i]
            # support |y - c_j| < tau with c_j = (j + 0.5)/bins
            lo = <Py_ssize_t>((y - tau) * bins - 0.5) - 1
            hi = <Py_ssize_t>((y + tau) * bins - 0.5) + 2
            if lo < 0:
                lo = 0
            if hi > bins:
                hi = bins
            for j in range(lo, hi):
                c = (j + 0.5) / bins
                w = 1.0 - fabs(y - c) / tau
                if w > 0.0:
                    ov[j] += w
    out /= n
    return out


def grad_logistic(
    cnp.ndarray[cnp.float64_t, ndim=1] samples,
    int bins,
    double tau,
    cnp.ndarray[cnp.float64_t, ndim=1] tail,
    double csum,
    double mass_sum,
):
    cdef Py_ssize_t n = samples.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double[:] ov = out
    cdef double[:] sv = samples
    cdef double[:] tv = tail
    cdef double inv_b = 1.0 / bins
    cdef double scale = 1.0 / (bins * mass_sum * n * tau)
    cdef double y, prev, cur, first, acc
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(n):
            y = sv[i]
            first = _dsigmoid(y / tau)
            prev = first
            acc = 0.0
            for j in range(bins):
                cur = _dsigmoid((y - (j + 1) * inv_b) / tau)
                acc += tv[j] * (prev - cur)
                prev = cur
            ov[i] = scale * (acc - csum * (first - prev))
    return out


def grad_triangular(
    cnp.ndarray[cnp.float64_t, ndim=1] samples,
    int bins,
    double tau,
    cnp.ndarray[cnp.float64_t, ndim=1] tail,
    double csum,
    double mass_sum,
):
    cdef Py_ssize_t n = samples.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double[:] ov = out
    cdef double[:] sv = samples
    cdef double[:] tv = tail
    cdef double scale = 1.0 / (bins * mass_sum * n * tau)
    cdef double y, c, d, s, acc, dtot
    cdef Py_ssize_t i, j, lo, hi
    with nogil:
        for i in range(n):
            y = sv[i]
            lo = <Py_ssize_t>((y - tau) * bins - 0.5) - 1
            hi = <Py_ssize_t>((y + tau) * bins - 0.5) + 2
            if lo < 0:
                lo = 0
            if hi > bins:
                hi = bins
            acc = 0.0
            dtot = 0.0
            for j in range(lo, hi):
                c = (j + 0.5) / bins
                d = y - c
                if fabs(d) < tau:
                    if d > 0.0:
                        s = -1.0
                    elif d < 0.0:
                        s = 1.0
                    else:
                        s = 0.0
                    acc += s * tv[j]
                    dtot += s
            ov[i] = scale * (acc - csum * dtot)
    return out
