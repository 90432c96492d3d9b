"""Merging fine sub-clusters into final concepts.

Every pair of sub-clusters is projected onto the segment joining their
prototypes (prototype i at -0.5, prototype j at +0.5). A two-component
Gaussian mixture over those projections is evaluated on a 0.01 grid; the
separation of the pair is the reciprocal of the mixture density at the
valley between the two component means. Pairs with dense valleys merge
first, single-linkage style, and the number of clusters is picked by the
normalized separation + compactness score.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .chunk import Chunk, DegenerateGeometryError, InvalidInputError, SubClusterPartition

GRID = np.round(np.linspace(-0.5, 0.5, 101), 2)
VAR_FLOOR = 1e-6
ZETA_CAP = 1e12


@dataclass(frozen=True)
class ProjectedDensityModel:
    means: tuple[float, float]
    variances: tuple[float, float]
    weights: tuple[float, float]

    def pdf(self, a) -> np.ndarray:
        a = np.asarray(a, dtype=np.float64)
        out = np.zeros_like(a)
        for mu, var, w in zip(self.means, self.variances, self.weights):
            out += w * np.exp(-0.5 * (a - mu) ** 2 / var) / np.sqrt(2.0 * np.pi * var)
        return out


@dataclass(frozen=True)
class SeparationRecord:
    pair: tuple[int, int]
    zeta: float


@dataclass
class MergeStage:
    """Clustering state with ``epsilon`` clusters.

    ``merged`` is the pair of cluster positions (in the previous stage's
    queue list) whose union produced this stage; None for the finest stage.
    """

    epsilon: int
    merged: tuple[int, int] | None
    sep: float
    com: float
    queues: list[list[int]]


@dataclass
class FusionResult:
    k_star: int
    queues: list[list[int]]
    stages: list[MergeStage] = field(default_factory=list)

    def prototype_to_cluster(self, n_prototypes: int) -> np.ndarray:
        lookup = np.full(n_prototypes, -1, dtype=np.int64)
        for i, q in enumerate(self.queues):
            lookup[q] = i
        return lookup

    def to_dict(self) -> dict:
        return {
            "k_star": self.k_star,
            "queues": self.queues,
            "stages": [
                {"epsilon": s.epsilon, "merged": list(s.merged) if s.merged else None,
                 "sep": s.sep, "com": s.com, "queues": s.queues}
                for s in self.stages
            ],
        }

    def dump_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)


def project_pair(chunk: Chunk, part: SubClusterPartition, i: int, j: int, protos) -> np.ndarray:
    """Positions of the members of sub-clusters i and j on the s_i -> s_j axis.

    Rows are ordered as ``members(i)`` followed by ``members(j)``.
    """
    P = getattr(protos, "prototypes", protos)
    if i == j:
        raise InvalidInputError("project_pair needs two distinct sub-clusters")
    s_i, s_j = P[i], P[j]
    axis = s_j - s_i
    L2 = float(axis @ axis)
    if L2 == 0.0:
        raise DegenerateGeometryError(f"prototypes {i} and {j} coincide")
    idx = np.concatenate([np.flatnonzero(part.assignment == i), np.flatnonzero(part.assignment == j)])
    if len(idx) == 0:
        raise InvalidInputError("both sub-clusters are empty")
    return (chunk.X[idx] - s_i) @ axis / L2 - 0.5


def fit_projected_mixture(pos_i, pos_j) -> ProjectedDensityModel:
    pos_i = np.asarray(pos_i, dtype=np.float64)
    pos_j = np.asarray(pos_j, dtype=np.float64)
    if len(pos_i) == 0 or len(pos_j) == 0:
        raise InvalidInputError("both components need at least one position")
    n = len(pos_i) + len(pos_j)
    var_i, var_j = float(pos_i.var()), float(pos_j.var())
    # a one-sample component has no spread estimate; borrow its partner's
    if len(pos_i) < 2:
        var_i = var_j
    if len(pos_j) < 2:
        var_j = var_i
    return ProjectedDensityModel(
        (float(pos_i.mean()), float(pos_j.mean())),
        (max(var_i, VAR_FLOOR), max(var_j, VAR_FLOOR)),
        (len(pos_i) / n, len(pos_j) / n),
    )


def pair_separation(positions_i, positions_j) -> float:
    """Reciprocal of the mixture's valley density between the two means."""
    model = fit_projected_mixture(positions_i, positions_j)
    lo, hi = sorted(model.means)
    between = GRID[(GRID >= lo) & (GRID <= hi)]
    if len(between) == 0:
        # both means fall in one grid cell (or outside the grid): nearest grid point
        between = GRID[[np.argmin(np.abs(GRID - 0.5 * (lo + hi)))]]
    valley = float(model.pdf(between).min())
    if valley <= 1.0 / ZETA_CAP:
        return ZETA_CAP
    return 1.0 / valley


def separation_matrix(chunk: Chunk, part: SubClusterPartition, protos) -> np.ndarray:
    """Symmetric matrix of pairwise prototype separations (diagonal = inf)."""
    P = getattr(protos, "prototypes", protos)
    k = len(P)
    members = [np.flatnonzero(part.assignment == a) for a in range(k)]
    Z = np.full((k, k), np.inf)
    for i in range(k):
        for j in range(i + 1, k):
            axis = P[j] - P[i]
            L2 = float(axis @ axis)
            if L2 == 0.0:
                raise DegenerateGeometryError(f"prototypes {i} and {j} coincide")
            pi = (chunk.X[members[i]] - P[i]) @ axis / L2 - 0.5
            pj = (chunk.X[members[j]] - P[i]) @ axis / L2 - 0.5
            Z[i, j] = Z[j, i] = pair_separation(pi, pj)
    return Z


def _compactness(X, assignment, proto_cluster, n_clusters) -> float:
    """Mean squared distance of each sample to its merged cluster's centroid."""
    labels = proto_cluster[assignment]
    total = 0.0
    for c in range(n_clusters):
        pts = X[labels == c]
        if len(pts):
            total += float(np.sum((pts - pts.mean(axis=0)) ** 2))
    return total / len(X)


def merge_hierarchy(chunk: Chunk, part: SubClusterPartition, protos, zeta=None) -> list[MergeStage]:
    """Greedy single-linkage agglomeration on pairwise separation.

    Returns stages for epsilon = k down to 1. Cluster groups are kept sorted
    by their smallest prototype index; ties on separation go to the
    lexicographically smallest pair of group positions.
    """
    P = getattr(protos, "prototypes", protos)
    k = len(P)
    if np.any(part.counts[:k] == 0) or len(part.counts) != k:
        raise InvalidInputError("every sub-cluster must be nonempty")
    X = chunk.X
    Z = separation_matrix(chunk, part, P) if zeta is None else zeta
    groups = [[a] for a in range(k)]

    def snapshot():
        return [list(g) for g in groups]

    def state_scores():
        lookup = np.empty(k, dtype=np.int64)
        for c, g in enumerate(groups):
            lookup[g] = c
        com = _compactness(X, part.assignment, lookup, len(groups))
        if len(groups) < 2:
            return 0.0, com
        link = _linkage(Z, groups)
        return 1.0 / float(link.min()), com

    sep, com = state_scores()
    stages = [MergeStage(k, None, sep, com, snapshot())]
    while len(groups) > 1:
        link = _linkage(Z, groups)
        flat = int(np.argmin(link))  # row-major argmin = lowest (a, b) on ties
        a, b = divmod(flat, len(groups))
        merged = sorted(groups[a] + groups[b])
        groups = [g for c, g in enumerate(groups) if c not in (a, b)] + [merged]
        groups.sort(key=lambda g: g[0])
        sep, com = state_scores()
        stages.append(MergeStage(len(groups), (a, b), sep, com, snapshot()))
    return stages


def _linkage(Z, groups) -> np.ndarray:
    m = len(groups)
    link = np.full((m, m), np.inf)
    for a in range(m):
        for b in range(a + 1, m):
            link[a, b] = Z[np.ix_(groups[a], groups[b])].min()
    return link


def select_k_star(stages: list[MergeStage]) -> FusionResult:
    """Stage minimizing sep/max(sep) + com/max(com) over epsilon in [1, k-1].

    Maxima are taken over all recorded stages; a column whose maximum is 0
    contributes nothing. Lowest epsilon wins ties.
    """
    if not stages:
        raise InvalidInputError("no merge stages")
    by_eps = {s.epsilon: s for s in stages}
    k = max(by_eps)
    if k == 1:
        s = by_eps[1]
        return FusionResult(1, s.queues, stages)
    sep_max = max(s.sep for s in stages)
    com_max = max(s.com for s in stages)
    best_eps, best = None, np.inf
    for eps in range(1, k):
        s = by_eps[eps]
        score = (s.sep / sep_max if sep_max > 0 else 0.0) + (s.com / com_max if com_max > 0 else 0.0)
        if score < best:
            best_eps, best = eps, score
    return FusionResult(best_eps, by_eps[best_eps].queues, stages)


def fuse(chunk: Chunk, part: SubClusterPartition, protos) -> FusionResult:
    k = len(getattr(protos, "prototypes", protos))
    if k == 1:
        com = _compactness(chunk.X, part.assignment, np.zeros(1, dtype=np.int64), 1)
        return FusionResult(1, [[0]], [MergeStage(1, None, 0.0, com, [[0]])])
    return select_k_star(merge_hierarchy(chunk, part, protos))
