"""Numpy implementations of the compiled kernels.

Used when the extension is not built, and as the reference the compiled
versions are tested against.
"""
import math

import numpy as np


def _sq_dists(A, B):
    # feature-by-feature accumulation mirrors the compiled loop order
    out = np.zeros((A.shape[0], B.shape[0]))
    for f in range(A.shape[1]):
        diff = B[None, :, f] - A[:, None, f]
        out += diff * diff
    return out


def pairwise_sq_dists(X):
    X = np.ascontiguousarray(X, dtype=np.float64)
    D = _sq_dists(X, X)
    np.fill_diagonal(D, 0.0)
    return D


def nearest_neighbor(X):
    D = pairwise_sq_dists(X)
    np.fill_diagonal(D, np.inf)
    return np.argmin(D, axis=1).astype(np.int64)


def assign_nearest(X, P):
    X = np.ascontiguousarray(X, dtype=np.float64)
    P = np.ascontiguousarray(P, dtype=np.float64)
    D = _sq_dists(X, P)
    idx = np.argmin(D, axis=1).astype(np.int64)
    return idx, D[np.arange(X.shape[0]), idx]


def competitive_epoch(P, X, order, alpha, rival_rate=1.0):
    k, d = P.shape
    wins = np.zeros(k, dtype=np.int64)
    for h in order:
        x = X[h]
        d2 = np.zeros(k)
        for f in range(d):
            diff = P[:, f] - x[f]
            d2 += diff * diff
        v = int(np.argmin(d2))
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
            step = math.exp(-(d2[j] - dv) / den) * alpha * rival_rate
            P[j] = P[j] - step * (x - P[j])
        P[v] = P[v] + alpha * (x - P[v])
        wins[v] += 1
    return wins
