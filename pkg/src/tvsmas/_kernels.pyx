# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; see _kernels_py for the reference semantics."""

import numpy as np
from libc.math cimport fabs, pow, sqrt, copysign, INFINITY


cdef inline double _sig(double d, double m) noexcept nogil:
    if d == 0.0:
        return 0.0
    return copysign(pow(fabs(d), m), d)


cdef inline double _sgn(double d, double eps) noexcept nogil:
    cdef double a
    if eps > 0.0:
        a = fabs(d)
        return d / (a if a > eps else eps)
    if d > 0.0:
        return 1.0
    if d < 0.0:
        return -1.0
    return 0.0


def coupling_sum(weights, states, double alpha, double beta, double gamma,
                 double p, double q, int third, double eps):
    cdef double[:, ::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef double[:, :, ::1] s = np.ascontiguousarray(states, dtype=np.float64)
    cdef Py_ssize_t nb = s.shape[0], n = s.shape[1], nk = s.shape[2]
    out_arr = np.zeros((nb, n, nk), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t b, i, j, k
    cdef double wij, d, g
    with nogil:
        for b in range(nb):
            for i in range(n):
                for j in range(n):
                    wij = w[i, j]
                    if wij == 0.0:
                        continue
                    for k in range(nk):
                        d = s[b, i, k] - s[b, j, k]
                        if third == 0:
                            g = d
                        else:
                            g = _sgn(d, eps)
                        out[b, i, k] += wij * (-alpha * _sig(d, p) - beta * _sig(d, q) - gamma * g)
    return out_arr


def max_pair_excess(values, points, double slope):
    cdef double[:, ::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef double[:, ::1] x = np.ascontiguousarray(points, dtype=np.float64)
    cdef Py_ssize_t n = v.shape[0], kv = v.shape[1], kx = x.shape[1]
    cdef Py_ssize_t a, b, k
    cdef double dv, dx, t, best = -INFINITY
    with nogil:
        for a in range(n):
            for b in range(a + 1, n):
                dv = 0.0
                for k in range(kv):
                    t = v[a, k] - v[b, k]
                    dv += t * t
                dx = 0.0
                for k in range(kx):
                    t = x[a, k] - x[b, k]
                    dx += t * t
                t = sqrt(dv) - slope * sqrt(dx)
                if t > best:
                    best = t
    return best
