"""One-cluster descriptors: one boundary per cluster, fit on that cluster only.

Two kinds share the same contract:

``soft-ball``
    Center at the cluster mean, radius at the (1 - nu) quantile of the
    training distances. Closed ball: a point exactly on the sphere is
    in-distribution.
``kernel-svdd``
    Gaussian-kernel support vector data description solved by SMO.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .chunk import InvalidInputError

MIN_RADIUS = 1e-3
DESCRIPTOR_KINDS = ("soft-ball", "kernel-svdd")


@dataclass(frozen=True)
class DescriptorConfig:
    kind: str = "soft-ball"
    nu: float = 0.05
    lam: float | None = None  # kernel-svdd slack weight; None -> 1 / (nu * n)
    bandwidth: float | None = None  # kernel-svdd; None -> median pairwise distance
    tol: float = 1e-6
    max_sweeps: int = 100_000

    def __post_init__(self):
        if self.kind not in DESCRIPTOR_KINDS:
            raise InvalidInputError(f"unknown descriptor kind {self.kind!r}")
        if not 0.0 < self.nu < 1.0:
            raise InvalidInputError("nu must lie in (0, 1)")
        if self.lam is not None and self.lam <= 0:
            raise InvalidInputError("lam must be > 0")
        if self.bandwidth is not None and self.bandwidth <= 0:
            raise InvalidInputError("bandwidth must be > 0")


@dataclass(frozen=True)
class Descriptor:
    """Fitted boundary of a single cluster.

    For soft-ball, ``center``/``radius`` hold the sphere. For kernel-svdd,
    ``support`` are the support vectors, ``coef`` their weights, ``radius``
    the squared feature-space radius and ``offset`` the constant
    alpha' K alpha; ``bandwidth`` is the kernel width.
    """

    kind: str
    cluster: int
    n_train: int
    center: np.ndarray | None = None
    radius: float = 0.0
    support: np.ndarray | None = None
    coef: np.ndarray | None = None
    offset: float = 0.0
    bandwidth: float = 0.0

    @property
    def dim(self) -> int:
        return (self.center if self.center is not None else self.support).shape[-1]

    def _check(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.dim:
            raise InvalidInputError(f"dimension mismatch: {X.shape[-1]} vs descriptor {self.dim}")
        return X

    def scores(self, X) -> np.ndarray:
        """Vectorized ``score`` over the rows of ``X``."""
        X = np.atleast_2d(self._check(X))
        if self.kind == "soft-ball":
            return np.sqrt(np.sum((X - self.center) ** 2, axis=1)) - self.radius
        K = _rbf(X, self.support, self.bandwidth)
        dist2 = 1.0 - 2.0 * K @ self.coef + self.offset
        return dist2 - self.radius

    def flags(self, X) -> np.ndarray:
        """Vectorized ``classify``: 1 = out-of-distribution."""
        return (self.scores(X) > 0).astype(np.int64)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "cluster": self.cluster, "n_train": self.n_train,
             "radius": float.hex(float(self.radius))}
        if self.kind == "soft-ball":
            d["center"] = [float.hex(float(v)) for v in self.center]
        else:
            d["support"] = [[float.hex(float(v)) for v in row] for row in self.support]
            d["coef"] = [float.hex(float(v)) for v in self.coef]
            d["offset"] = float.hex(float(self.offset))
            d["bandwidth"] = float.hex(float(self.bandwidth))
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Descriptor":
        fx = float.fromhex
        kw = dict(kind=d["kind"], cluster=int(d["cluster"]), n_train=int(d["n_train"]),
                  radius=fx(d["radius"]))
        if d["kind"] == "soft-ball":
            kw["center"] = np.array([fx(v) for v in d["center"]])
        else:
            kw["support"] = np.array([[fx(v) for v in row] for row in d["support"]])
            kw["coef"] = np.array([fx(v) for v in d["coef"]])
            kw["offset"] = fx(d["offset"])
            kw["bandwidth"] = fx(d["bandwidth"])
        return cls(**kw)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s: str) -> "Descriptor":
        return cls.from_dict(json.loads(s))


def fit_descriptor(cluster_samples, cfg: DescriptorConfig = DescriptorConfig(), cluster: int = 0) -> Descriptor:
    X = np.atleast_2d(np.asarray(cluster_samples, dtype=np.float64))
    if X.shape[0] == 0:
        raise InvalidInputError("cannot fit a descriptor on an empty cluster")
    if cfg.kind == "soft-ball":
        center = X.mean(axis=0)
        d = np.sqrt(np.sum((X - center) ** 2, axis=1))
        radius = float(np.quantile(d, 1.0 - cfg.nu)) if len(d) > 1 else 0.0
        return Descriptor("soft-ball", cluster, len(X), center=center, radius=max(radius, MIN_RADIUS))
    return _fit_svdd(X, cfg, cluster)


def classify(desc: Descriptor, x) -> int:
    """1 if ``x`` lies outside the descriptor's boundary, else 0."""
    return int(desc.flags(np.atleast_2d(x))[0])


def score(desc: Descriptor, x) -> float:
    """Signed out-of-distribution score; positive exactly when ``classify`` is 1."""
    return float(desc.scores(np.atleast_2d(x))[0])


# -- kernel SVDD ------------------------------------------------------------

def _rbf(A, B, bandwidth):
    d2 = np.sum(A * A, axis=1)[:, None] + np.sum(B * B, axis=1)[None, :] - 2.0 * A @ B.T
    return np.exp(-np.maximum(d2, 0.0) / (2.0 * bandwidth * bandwidth))


def _median_bandwidth(X):
    if len(X) < 2:
        return 1.0
    d2 = np.sum((X[:, None, :] - X[None, :, :]) ** 2, axis=-1)
    med = float(np.median(np.sqrt(d2[np.triu_indices(len(X), 1)])))
    return med if med > 0 else 1.0


def _frank_wolfe_gap(g, alpha, C):
    """g.alpha - min over the feasible set of g.beta (upper bound on the suboptimality)."""
    order = np.argsort(g, kind="stable")
    remaining, best = 1.0, 0.0
    for i in order:
        take = min(C, remaining)
        best += take * g[i]
        remaining -= take
        if remaining <= 0:
            break
    return float(g @ alpha - best)


def _fit_svdd(X, cfg: DescriptorConfig, cluster: int) -> Descriptor:
    n = len(X)
    bw = cfg.bandwidth or _median_bandwidth(X)
    C = cfg.lam if cfg.lam is not None else 1.0 / (cfg.nu * n)
    C = max(C, 1.0 / n)  # feasibility of sum(alpha) = 1
    K = _rbf(X, X, bw)
    # objective alpha'K alpha - alpha'diag(K); gradient 2 K alpha - diag(K)
    alpha = np.zeros(n)
    m = int(math.floor(1.0 / C))
    alpha[:m] = C
    if m < n:
        alpha[m] = 1.0 - m * C
    g = 2.0 * K @ alpha - np.diag(K)
    eps = 1e-12
    for _ in range(cfg.max_sweeps):
        up = alpha < C - eps
        low = alpha > eps
        i = int(np.flatnonzero(up)[np.argmin(g[up])])
        j = int(np.flatnonzero(low)[np.argmax(g[low])])
        if g[j] - g[i] < cfg.tol and _frank_wolfe_gap(g, alpha, C) < cfg.tol:
            break
        curv = 2.0 * (K[i, i] + K[j, j] - 2.0 * K[i, j])
        t = (g[j] - g[i]) / curv if curv > 0 else np.inf
        t = min(t, C - alpha[i], alpha[j])
        if t <= 0:
            break
        alpha[i] += t
        alpha[j] -= t
        g += 2.0 * t * (K[:, i] - K[:, j])
    sv = alpha > eps
    offset = float(alpha @ K @ alpha)
    dist2 = 1.0 - 2.0 * K @ alpha + offset
    free = sv & (alpha < C - eps)
    if free.any():
        # free SVs sit on the boundary; take the largest so all of them stay inside
        r2 = float(dist2[free].max())
    else:
        r2 = 0.5 * (float(dist2[alpha >= C - eps].min(initial=np.inf)) + float(dist2[~sv].max(initial=0.0)))
    return Descriptor("kernel-svdd", cluster, n, support=X[sv].copy(), coef=alpha[sv].copy(),
                      radius=max(r2, 0.0), offset=offset, bandwidth=bw)
