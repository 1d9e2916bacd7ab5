# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: Matern-5/2 covariance builds and the Monte-Carlo
min-distance reduction. Signatures match ``_purepy`` exactly."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, fmod, sqrt

cnp.import_array()

cdef double SQRT5 = sqrt(5.0)


cdef inline double _m52(double d, double theta) nogil:
    return theta * (1.0 + SQRT5 * d + (5.0 / 3.0) * d * d) * exp(-SQRT5 * d)


cdef inline double _circ(double diff, double period) nogil:
    cdef double w = fmod(fabs(diff), period)
    if w > period - w:
        w = period - w
    return w


def matern52_cross(object xa, object xb, object lam, double theta):
    """Cross-covariance matrix k(xa_i, xb_j), shape (n, m)."""
    cdef double[:, ::1] a = np.ascontiguousarray(xa, dtype=np.float64)
    cdef double[:, ::1] b = np.ascontiguousarray(xb, dtype=np.float64)
    cdef double[::1] l = np.ascontiguousarray(lam, dtype=np.float64)
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0], dim = a.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j, k
    cdef double q, dx, d
    with nogil:
        for i in range(n):
            for j in range(m):
                q = 0.0
                for k in range(dim):
                    dx = a[i, k] - b[j, k]
                    q += l[k] * dx * dx
                d = sqrt(q) if q > 0.0 else 0.0
                o[i, j] = _m52(d, theta)
    return out


def matern52_gram(object x, object lam, double theta):
    """Symmetric Gram matrix with diagonal exactly ``theta``."""
    cdef double[:, ::1] a = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] l = np.ascontiguousarray(lam, dtype=np.float64)
    cdef Py_ssize_t n = a.shape[0], dim = a.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((n, n), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j, k
    cdef double q, dx, v
    with nogil:
        for i in range(n):
            o[i, i] = theta
            for j in range(i + 1, n):
                q = 0.0
                for k in range(dim):
                    dx = a[i, k] - a[j, k]
                    q += l[k] * dx * dx
                v = _m52(sqrt(q) if q > 0.0 else 0.0, theta)
                o[i, j] = v
                o[j, i] = v
    return out


def min_dist(object pts, object refs, double period=0.0):
    """Per-point minimum distance to the reference set.

    ``period > 0`` selects the per-component circular distance.
    """
    cdef double[:, ::1] p = np.ascontiguousarray(np.atleast_2d(pts), dtype=np.float64)
    cdef double[:, ::1] r = np.ascontiguousarray(np.atleast_2d(refs), dtype=np.float64)
    cdef Py_ssize_t n = p.shape[0], m = r.shape[0], dim = p.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t i, j, k
    cdef double best, q, w
    with nogil:
        for i in range(n):
            best = -1.0
            for j in range(m):
                q = 0.0
                for k in range(dim):
                    w = p[i, k] - r[j, k]
                    if period > 0.0:
                        w = _circ(w, period)
                    q += w * w
                if best < 0.0 or q < best:
                    best = q
            o[i] = sqrt(best)
    return out


def mc_min_dist_mean(object mu, object sigma, object z, object refs, double period=0.0):
    """Mean over draws of the min distance from ``mu + sigma * z`` to ``refs``."""
    cdef double[::1] m_ = np.ascontiguousarray(mu, dtype=np.float64)
    cdef double[::1] s = np.ascontiguousarray(sigma, dtype=np.float64)
    cdef double[:, ::1] zs = np.ascontiguousarray(np.atleast_2d(z), dtype=np.float64)
    cdef double[:, ::1] r = np.ascontiguousarray(np.atleast_2d(refs), dtype=np.float64)
    cdef Py_ssize_t n = zs.shape[0], t = r.shape[0], dim = zs.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double total = 0.0, best, q, w, f, half = 0.5 * period
    with nogil:
        for i in range(n):
            best = -1.0
            for j in range(t):
                q = 0.0
                for k in range(dim):
                    f = m_[k] + s[k] * zs[i, k]
                    if period > 0.0:
                        # wrap the draw into the principal range before distancing
                        f = fmod(f + half, period)
                        if f < 0.0:
                            f += period
                        f -= half
                        w = _circ(f - r[j, k], period)
                    else:
                        w = f - r[j, k]
                    q += w * w
                if best < 0.0 or q < best:
                    best = q
            total += sqrt(best)
    return total / n
