"""Reverse-nearest-neighbor density and density-gap prototype seeding."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .chunk import Chunk, InvalidInputError
from .competitive import PrototypeSet


@dataclass(frozen=True)
class NeighborTable:
    """``nn[h]`` is the nearest other sample; ``rnn[h]`` the samples whose nearest is ``h``."""

    nn: np.ndarray
    rnn: list[np.ndarray]


@dataclass(frozen=True)
class DensityStats:
    rho: np.ndarray
    delta: np.ndarray


def _distance_matrix(chunk: Chunk) -> np.ndarray:
    return np.sqrt(kernels.pairwise_sq_dists(np.ascontiguousarray(chunk.X)))


def compute_rnn(chunk: Chunk) -> NeighborTable:
    if chunk.n < 2:
        raise InvalidInputError("reverse nearest neighbors need at least 2 samples")
    nn = kernels.nearest_neighbor(np.ascontiguousarray(chunk.X))
    order = np.argsort(nn, kind="stable")
    bounds = np.searchsorted(nn[order], np.arange(chunk.n + 1))
    rnn = [order[bounds[h]:bounds[h + 1]] for h in range(chunk.n)]
    return NeighborTable(nn, rnn)


def local_density(chunk: Chunk, table: NeighborTable, dists=None) -> np.ndarray:
    """exp(-mean distance to reverse neighbors); 0 for samples nobody points at."""
    X = chunk.X
    rho = np.zeros(chunk.n)
    for h, members in enumerate(table.rnn):
        if len(members) == 0:
            continue
        if dists is not None:
            d = dists[h, members]
        else:
            d = np.sqrt(np.sum((X[members] - X[h]) ** 2, axis=1))
        rho[h] = np.exp(-d.mean())
    return rho


def density_gap(chunk: Chunk, rho, dists=None) -> np.ndarray:
    """Distance to the nearest strictly denser sample.

    Samples with no strictly denser sample (all global maxima) get their
    largest distance to any other sample.
    """
    D = _distance_matrix(chunk) if dists is None else dists
    rho = np.asarray(rho, dtype=np.float64)
    higher = rho[None, :] > rho[:, None]
    masked = np.where(higher, D, np.inf)
    delta = masked.min(axis=1)
    top = ~higher.any(axis=1)
    if top.any():
        delta[top] = D[top].max(axis=1)
    return delta


def density_stats(chunk: Chunk, table: NeighborTable | None = None) -> DensityStats:
    D = _distance_matrix(chunk)
    table = table or compute_rnn(chunk)
    rho = local_density(chunk, table, D)
    return DensityStats(rho, density_gap(chunk, rho, D))


def ranking_gap(chunk: Chunk, rho, dists=None) -> np.ndarray:
    """Density gap with rho ties broken by sample id (lower id counts as denser).

    Unlike ``density_gap``, exactly one sample (the densest, lowest id)
    gets the max-distance rule, so a mutual-nearest pair with equal rho
    cannot take two seed slots.
    """
    D = _distance_matrix(chunk) if dists is None else dists
    rho = np.asarray(rho, dtype=np.float64)
    ids = np.arange(len(rho))
    higher = (rho[None, :] > rho[:, None]) | ((rho[None, :] == rho[:, None]) & (ids[None, :] < ids[:, None]))
    gap = np.where(higher, D, np.inf).min(axis=1)
    top = ~higher.any(axis=1)
    gap[top] = D[top].max(axis=1)
    return gap


def seed_prototypes(chunk: Chunk, kappa0: int, stats: DensityStats | None = None) -> PrototypeSet:
    """Copies of the ``kappa0`` samples with the largest density gaps.

    Ranking uses ``ranking_gap`` (rho ties broken by id); remaining ties go
    to the lower sample id. A candidate sitting exactly on an already
    chosen seed is skipped, so seeds are pairwise distinct.
    """
    if not 2 <= kappa0 <= chunk.n:
        raise InvalidInputError(f"kappa0={kappa0} outside [2, n={chunk.n}]")
    stats = stats or density_stats(chunk)
    ranked = np.argsort(-ranking_gap(chunk, stats.rho), kind="stable")
    chosen = []
    for h in ranked:
        x = chunk.X[h]
        if any(np.array_equal(x, chunk.X[c]) for c in chosen):
            continue
        chosen.append(int(h))
        if len(chosen) == kappa0:
            break
    if len(chosen) < kappa0:
        raise InvalidInputError(f"only {len(chosen)} distinct points for kappa0={kappa0}")
    return PrototypeSet(chunk.X[chosen].copy())


def random_seed_prototypes(chunk: Chunk, kappa0: int, rng) -> PrototypeSet:
    """Uniformly random distinct samples as seeds (ablation baseline)."""
    if not 2 <= kappa0 <= chunk.n:
        raise InvalidInputError(f"kappa0={kappa0} outside [2, n={chunk.n}]")
    chosen = []
    for h in rng.permutation(chunk.n):
        if any(np.array_equal(chunk.X[h], chunk.X[c]) for c in chosen):
            continue
        chosen.append(int(h))
        if len(chosen) == kappa0:
            break
    if len(chosen) < kappa0:
        raise InvalidInputError(f"only {len(chosen)} distinct points for kappa0={kappa0}")
    return PrototypeSet(chunk.X[chosen].copy())
