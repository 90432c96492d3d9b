# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops.

Every routine here has a numpy twin in ``_kernels_py`` with the same
signature. Squared distances are accumulated feature by feature in index
order in both, so distance-based outputs (neighbors, assignments) agree
bit for bit.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp

cnp.import_array()


def pairwise_sq_dists(const double[:, ::1] X):
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1]
    cdef Py_ssize_t i, j, f
    cdef double acc, diff
    out = np.empty((n, n), dtype=np.float64)
    cdef double[:, ::1] D = out
    for i in range(n):
        D[i, i] = 0.0
        for j in range(i + 1, n):
            acc = 0.0
            for f in range(d):
                diff = X[j, f] - X[i, f]
                acc = acc + diff * diff
            D[i, j] = acc
            D[j, i] = acc
    return out


def nearest_neighbor(const double[:, ::1] X):
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1]
    cdef Py_ssize_t i, j, f, best
    cdef double acc, diff, best_d
    nn = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] out = nn
    for i in range(n):
        best = -1
        best_d = 0.0
        for j in range(n):
            if j == i:
                continue
            acc = 0.0
            for f in range(d):
                diff = X[j, f] - X[i, f]
                acc = acc + diff * diff
            if best < 0 or acc < best_d:
                best = j
                best_d = acc
        out[i] = best
    return nn


def assign_nearest(const double[:, ::1] X, const double[:, ::1] P):
    cdef Py_ssize_t n = X.shape[0], k = P.shape[0], d = X.shape[1]
    cdef Py_ssize_t i, j, f, best
    cdef double acc, diff, best_d
    idx = np.empty(n, dtype=np.int64)
    dist = np.empty(n, dtype=np.float64)
    cdef cnp.int64_t[::1] out = idx
    cdef double[::1] out_d = dist
    for i in range(n):
        best = 0
        best_d = 0.0
        for j in range(k):
            acc = 0.0
            for f in range(d):
                diff = P[j, f] - X[i, f]
                acc = acc + diff * diff
            if j == 0 or acc < best_d:
                best = j
                best_d = acc
        out[i] = best
        out_d[i] = best_d
    return idx, dist


def competitive_epoch(double[:, ::1] P, const double[:, ::1] X,
                      const cnp.int64_t[::1] order, double alpha, double rival_rate=1.0):
    """One pass of winner-attract / rival-repel updates, in place on ``P``."""
    cdef Py_ssize_t k = P.shape[0], d = P.shape[1], m = order.shape[0]
    cdef Py_ssize_t t, h, j, f, v
    cdef double acc, diff, dv, den, beta, step
    wins_arr = np.zeros(k, dtype=np.int64)
    cdef cnp.int64_t[::1] wins = wins_arr
    d2_arr = np.empty(k, dtype=np.float64)
    cdef double[::1] d2 = d2_arr
    for t in range(m):
        h = order[t]
        v = 0
        for j in range(k):
            acc = 0.0
            for f in range(d):
                diff = P[j, f] - X[h, f]
                acc = acc + diff * diff
            d2[j] = acc
            if acc < d2[v]:
                v = j
        dv = d2[v]
        for j in range(k):
            if j == v:
                continue
            den = 0.0
            for f in range(d):
                diff = P[v, f] - P[j, f]
                den = den + diff * diff
            if den == 0.0:
                raise ValueError(f"prototypes {v} and {j} coincide")
            beta = exp(-(d2[j] - dv) / den)
            step = beta * alpha * rival_rate
            for f in range(d):
                P[j, f] = P[j, f] - step * (X[h, f] - P[j, f])
        for f in range(d):
            P[v, f] = P[v, f] + alpha * (X[h, f] - P[v, f])
        wins[v] += 1
    return wins_arr
