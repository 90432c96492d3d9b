"""Incremental competitive-penalize prototype learning.

Winners are pulled toward each sample; every rival is pushed away by a
penalty that is strongest for samples near the winner/rival midpoint.
After each epoch the prototype set either loses all prototypes that won
nothing (and learning stops) or grows by one prototype.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .chunk import Chunk, DegenerateGeometryError, InvalidInputError, SubClusterPartition

log = logging.getLogger(__name__)


@dataclass
class PrototypeSet:
    prototypes: np.ndarray
    wins: np.ndarray = None

    def __post_init__(self):
        self.prototypes = np.array(self.prototypes, dtype=np.float64, order="C", ndmin=2)
        if self.wins is None:
            self.wins = np.zeros(len(self.prototypes), dtype=np.int64)
        else:
            self.wins = np.asarray(self.wins, dtype=np.int64)
        if len(self.wins) != len(self.prototypes):
            raise InvalidInputError("wins must have one entry per prototype")

    def __len__(self):
        return len(self.prototypes)

    def copy(self) -> "PrototypeSet":
        return PrototypeSet(self.prototypes.copy(), self.wins.copy())


@dataclass(frozen=True)
class LearnConfig:
    """Prototype learning knobs.

    ``growth_cap=None`` means ``min(n, 64)`` for the chunk being learned.
    ``shuffle_seed=None`` presents samples in chunk order.
    """

    kappa0: int = 10
    alpha: float = 0.05
    max_iters: int = 50
    growth_cap: int | None = None
    shuffle_seed: int | None = None
    rival_rate: float = 0.02

    def __post_init__(self):
        if self.kappa0 < 2:
            raise InvalidInputError("kappa0 must be >= 2")
        if not 0.0 < self.alpha < 1.0:
            raise InvalidInputError("alpha must lie in (0, 1)")
        if self.max_iters < 1:
            raise InvalidInputError("max_iters must be >= 1")
        if self.growth_cap is not None and self.growth_cap < 1:
            raise InvalidInputError("growth_cap must be >= 1")

    def cap_for(self, n: int) -> int:
        return self.growth_cap if self.growth_cap is not None else min(n, 64)


@dataclass
class UpdateStep:
    sample_id: int
    winner: int
    betas: dict[int, float] = field(default_factory=dict)
    displacements: np.ndarray | None = None


def assign_winner(protos, x) -> int:
    """Index of the prototype nearest to ``x`` (lowest index on ties)."""
    P = protos.prototypes if isinstance(protos, PrototypeSet) else np.asarray(protos, float)
    if len(P) == 0:
        raise InvalidInputError("empty prototype set")
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != P.shape[1]:
        raise InvalidInputError("dimension mismatch between sample and prototypes")
    return int(np.argmin(np.sum((P - x) ** 2, axis=1)))


def penalty_coefficient(s_j, s_v, x) -> float:
    """Rival penalty: exp(-(|s_j-x|^2 - |s_v-x|^2) / |s_v-s_j|^2)."""
    s_j, s_v, x = (np.asarray(a, dtype=np.float64) for a in (s_j, s_v, x))
    den = float(np.sum((s_v - s_j) ** 2))
    if den == 0.0:
        raise DegenerateGeometryError("rival coincides with the winner")
    return math.exp(-(float(np.sum((s_j - x) ** 2)) - float(np.sum((s_v - x) ** 2))) / den)


def update_prototypes(protos: PrototypeSet, x, alpha: float, sample_id: int = -1):
    """Apply one sample's update to ``protos`` in place.

    Returns ``(protos, step)``. Penalties are computed from the positions
    before any prototype moves.
    """
    if not 0.0 < alpha < 1.0:
        raise InvalidInputError("alpha must lie in (0, 1)")
    x = np.asarray(x, dtype=np.float64)
    P = protos.prototypes
    old = P.copy()
    v = assign_winner(old, x)
    betas = {}
    for j in range(len(P)):
        if j == v:
            continue
        beta = penalty_coefficient(old[j], old[v], x)
        betas[j] = beta
        P[j] = old[j] - beta * alpha * (x - old[j])
    P[v] = old[v] + alpha * (x - old[v])
    protos.wins[v] += 1
    return protos, UpdateStep(sample_id, v, betas, P - old)


def _new_prototype_position(X, P):
    """Sample with the largest distance to its winning prototype, or None."""
    _, d2 = kernels.assign_nearest(X, P)
    h = int(np.argmax(d2))
    if d2[h] == 0.0:
        return None
    return X[h]


def learn_prototypes(chunk: Chunk, cfg: LearnConfig, seeds: PrototypeSet):
    """Grow-and-eliminate competitive learning on one (normalized) chunk.

    Returns the surviving prototypes and the nearest-prototype partition of
    the chunk. Prototypes that end with no assigned sample are dropped so
    every sub-cluster is nonempty.
    """
    X = np.ascontiguousarray(chunk.X)
    n = X.shape[0]
    if seeds.prototypes.shape[1] != X.shape[1]:
        raise InvalidInputError("seed dimensionality does not match the chunk")
    P = seeds.prototypes.copy()
    cap = max(cfg.cap_for(n), len(P))
    order = np.arange(n, dtype=np.int64)
    rng = np.random.default_rng(cfg.shuffle_seed) if cfg.shuffle_seed is not None else None
    wins = np.zeros(len(P), dtype=np.int64)

    for epoch in range(cfg.max_iters):
        if rng is not None:
            order = rng.permutation(n).astype(np.int64)
        wins = kernels.competitive_epoch(P, X, order, cfg.alpha, cfg.rival_rate)
        if np.any(wins == 0):
            keep = wins > 0
            log.debug("epoch %d: eliminating %d prototypes", epoch, int((~keep).sum()))
            P = np.ascontiguousarray(P[keep])
            wins = wins[keep]
            break
        if len(P) >= cap:
            log.warning("prototype growth cap %d reached; stopping growth", cap)
            break
        s_new = _new_prototype_position(X, P)
        if s_new is None:
            break
        P = np.ascontiguousarray(np.vstack([P, s_new]))
        wins = np.append(wins, 0)

    assignment, _ = kernels.assign_nearest(X, P)
    counts = np.bincount(assignment, minlength=len(P))
    if np.any(counts == 0):
        keep = counts > 0
        P = np.ascontiguousarray(P[keep])
        wins = wins[keep]
        assignment, _ = kernels.assign_nearest(X, P)
    protos = PrototypeSet(P, wins)
    return protos, SubClusterPartition.from_assignment(assignment, len(P))
