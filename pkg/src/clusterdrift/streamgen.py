"""Synthetic imbalanced drift streams and drift injection into labeled tables.

Chunk ``t`` of a stream draws from its own generator seeded with
``(seed, t)``, so chunks can be produced in any order or in parallel and
still match a sequential run exactly.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .chunk import Chunk, InvalidInputError, ManifestEntry, write_chunk_csv, write_manifest

DRIFT_KINDS = ("mean", "covariance", "both", "moon-noise")
IR_GRID = (1, 3, 5, 7, 10, 15, 18, 20, 30, 40)
_SCHEDULE_STREAM = 2**32 - 1


class CapacityError(InvalidInputError):
    """Not enough rows to honor the requested per-class counts."""


@dataclass(frozen=True)
class ClusterSpec:
    """Gaussian (``mean``, ``cov``) or half-moon (``center``, ``radius``, ``noise``, ``upper``)."""

    kind: str = "gaussian"
    mean: tuple = (0.0, 0.0)
    cov: tuple = ((1.0, 0.0), (0.0, 1.0))
    center: tuple = (0.0, 0.0)
    radius: float = 1.0
    noise: float = 0.1
    upper: bool = True
    extra_noise: int = 0  # uniform boundary-noise samples added on top (moon drift)

    @property
    def dim(self) -> int:
        return len(self.mean) if self.kind == "gaussian" else len(self.center)

    def std(self) -> np.ndarray:
        if self.kind == "gaussian":
            return np.sqrt(np.diag(np.asarray(self.cov, dtype=float)))
        return np.full(self.dim, self.radius)

    def sample(self, n: int, rng) -> np.ndarray:
        if self.kind == "gaussian":
            X = rng.multivariate_normal(np.asarray(self.mean, float), np.asarray(self.cov, float),
                                        size=n, method="cholesky")
        elif self.kind == "moons":
            t = rng.uniform(0.0, math.pi, size=n)
            sign = 1.0 if self.upper else -1.0
            arc = np.stack([np.cos(t), sign * np.sin(t)], axis=1) * self.radius
            X = np.asarray(self.center, float)[:2] + arc + rng.normal(0.0, self.noise, size=(n, 2))
            if self.dim > 2:
                X = np.hstack([X, np.tile(np.asarray(self.center, float)[2:], (n, 1))])
        else:
            raise InvalidInputError(f"unknown cluster kind {self.kind!r}")
        if self.extra_noise:
            X = np.vstack([X, self._boundary_noise(self.extra_noise, rng)])
        return X

    def _boundary_noise(self, m, rng):
        # uniform over an annulus hugging the arc, outside the bulk of the noise band
        t = rng.uniform(0.0, math.pi, size=m)
        side = rng.choice([-1.0, 1.0], size=m)
        off = side * rng.uniform(3.0 * self.noise, 3.0 * self.noise + 0.5 * self.radius, size=m)
        r = self.radius + off
        sign = 1.0 if self.upper else -1.0
        pts = np.stack([r * np.cos(t), sign * r * np.sin(t)], axis=1) + np.asarray(self.center, float)[:2]
        if self.dim > 2:
            pts = np.hstack([pts, np.tile(np.asarray(self.center, float)[2:], (m, 1))])
        return pts

    @classmethod
    def from_dict(cls, d: dict) -> "ClusterSpec":
        d = dict(d)
        for key in ("mean", "center"):
            if key in d:
                d[key] = tuple(float(v) for v in d[key])
        if "cov" in d:
            cov = np.asarray(d["cov"], dtype=float)
            if cov.ndim == 1:
                cov = np.diag(cov)
            d["cov"] = tuple(tuple(float(v) for v in row) for row in cov)
        return cls(**d)


@dataclass(frozen=True)
class DriftSpec:
    target: int
    u: float
    kind: str = "mean"
    direction: tuple | None = None

    def __post_init__(self):
        if self.kind not in DRIFT_KINDS:
            raise InvalidInputError(f"unknown drift kind {self.kind!r}")
        if not 0.0 <= self.u < 1.0 + 1e-12:
            raise InvalidInputError("drift margin u must lie in [0, 1]")


@dataclass(frozen=True)
class StreamSpec:
    """Synthetic stream recipe.

    Clusters listed in ``minority`` get relative size 1, the rest get
    ``ir``; ``drift_target`` defaults to the first minority cluster.
    """

    clusters: tuple
    ir: float = 15.0
    minority: tuple | None = None
    n_base: int = 2000
    n_chunk: int = 500
    n_clean: int = 250
    n_drift: int = 250
    drift_kinds: tuple = ("mean",)
    drift_target: int | None = None
    u_range: tuple = (0.1, 1.0)
    seed: int = 0

    def __post_init__(self):
        if len(self.clusters) < 1:
            raise InvalidInputError("at least one cluster required")
        if self.ir < 1:
            raise InvalidInputError("imbalance ratio must be >= 1")
        for k in self.drift_kinds:
            if k not in DRIFT_KINDS:
                raise InvalidInputError(f"unknown drift kind {k!r}")
        if self.n_clean < 0 or self.n_drift < 0:
            raise InvalidInputError("chunk counts must be nonnegative")
        dims = {c.dim for c in self.clusters}
        if len(dims) != 1:
            raise InvalidInputError("all clusters must share one dimensionality")

    @property
    def minority_indices(self) -> tuple:
        if self.minority is not None:
            return tuple(self.minority)
        return (len(self.clusters) - 1,) if len(self.clusters) > 1 else ()

    @property
    def target(self) -> int:
        if self.drift_target is not None:
            return self.drift_target
        mins = self.minority_indices
        return mins[0] if mins else 0

    def weights(self) -> np.ndarray:
        w = np.full(len(self.clusters), float(self.ir))
        w[list(self.minority_indices)] = 1.0
        return w

    def to_dict(self) -> dict:
        d = asdict(self)
        d["clusters"] = [asdict(c) for c in self.clusters]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "StreamSpec":
        d = dict(d)
        d["clusters"] = tuple(ClusterSpec.from_dict(c) for c in d["clusters"])
        for key in ("minority", "drift_kinds", "u_range"):
            if d.get(key) is not None:
                d[key] = tuple(d[key])
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "StreamSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class LabeledStream:
    chunks: list[Chunk]
    drift_meta: dict = field(default_factory=dict)  # chunk_index -> ground-truth drift record

    @property
    def labels(self) -> list[bool]:
        return [bool(c.drift_label) for c in self.chunks[1:]]

    def digest(self) -> str:
        h = hashlib.sha256()
        for c in self.chunks:
            h.update(c.X.tobytes())
            h.update(b"1" if c.drift_label else b"0")
        return h.hexdigest()

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        entries = []
        for c in self.chunks:
            name = f"chunk_{c.chunk_index:05d}.csv"
            write_chunk_csv(c, out / name)
            entries.append(ManifestEntry(name, c.drift_label, self.drift_meta.get(c.chunk_index, {})))
        write_manifest(entries, out / "manifest.json")
        return out / "manifest.json"


def cluster_counts(weights, n: int) -> np.ndarray:
    """Largest-remainder split of ``n`` proportional to ``weights``."""
    w = np.asarray(weights, dtype=float)
    raw = n * w / w.sum()
    counts = np.floor(raw).astype(np.int64)
    rest = n - counts.sum()
    order = np.argsort(-(raw - counts), kind="stable")
    counts[order[:rest]] += 1
    return counts


def chunk_rng(seed: int, t: int):
    return np.random.default_rng([seed, t])


def _sample_clusters(clusters, counts, rng, chunk_index, drift_label=None):
    parts, labels = [], []
    for c, (spec, m) in enumerate(zip(clusters, counts)):
        X = spec.sample(int(m), rng)
        parts.append(X)
        labels.append(np.full(len(X), c))
    # samples arrive interleaved, not grouped by cluster
    order = rng.permutation(sum(len(X) for X in parts))
    return Chunk(np.vstack(parts)[order], chunk_index=chunk_index, drift_label=drift_label,
                 labels=np.concatenate(labels)[order])


def gen_base(spec: StreamSpec) -> Chunk:
    counts = cluster_counts(spec.weights(), spec.n_base)
    if counts.min() < 2:
        raise InvalidInputError(f"n_base={spec.n_base} leaves a cluster with {counts.min()} samples")
    return _sample_clusters(spec.clusters, counts, chunk_rng(spec.seed, 0), 0, drift_label=False)


def random_direction(dim: int, rng) -> np.ndarray:
    v = rng.normal(size=dim)
    return v / np.linalg.norm(v)


def inject_drift(spec: StreamSpec, drift: DriftSpec, rng=None) -> tuple:
    """Cluster specs with ``drift`` applied to the target cluster.

    A mean drift without an explicit ``direction`` draws one from ``rng``.
    """
    if not 0 <= drift.target < len(spec.clusters):
        raise InvalidInputError(f"drift target {drift.target} does not exist")
    c = spec.clusters[drift.target]
    u = drift.u
    if drift.kind in ("mean", "both"):
        direction = drift.direction
        if direction is None:
            direction = random_direction(c.dim, rng if rng is not None else np.random.default_rng(0))
        shift = u * c.std() * np.asarray(direction, dtype=float)
        if c.kind == "gaussian":
            c = replace(c, mean=tuple(float(v) for v in np.asarray(c.mean) + shift))
        else:
            c = replace(c, center=tuple(float(v) for v in np.asarray(c.center) + shift))
    if drift.kind in ("covariance", "both"):
        if c.kind == "gaussian":
            cov = np.asarray(c.cov, dtype=float) * (1.0 + u) ** 2
            c = replace(c, cov=tuple(tuple(float(v) for v in row) for row in cov))
        else:
            c = replace(c, noise=c.noise * (1.0 + u))
    if drift.kind == "moon-noise":
        n_target = int(cluster_counts(spec.weights(), spec.n_chunk)[drift.target])
        c = replace(c, extra_noise=int(math.ceil(u * n_target)))
    clusters = list(spec.clusters)
    clusters[drift.target] = c
    return tuple(clusters)


def drift_schedule(spec: StreamSpec) -> np.ndarray:
    """Boolean drift flag for incoming chunks 1..n_clean+n_drift (seeded shuffle)."""
    flags = np.array([False] * spec.n_clean + [True] * spec.n_drift)
    return chunk_rng(spec.seed, _SCHEDULE_STREAM).permutation(flags)


def gen_chunk(spec: StreamSpec, t: int, drifted: bool):
    """Incoming chunk ``t`` (t >= 1) and its drift record (empty if clean)."""
    rng = chunk_rng(spec.seed, t)
    counts = cluster_counts(spec.weights(), spec.n_chunk)
    if not drifted:
        return _sample_clusters(spec.clusters, counts, rng, t, drift_label=False), {}
    kind = spec.drift_kinds[int(rng.integers(len(spec.drift_kinds)))]
    u = float(rng.uniform(*spec.u_range))
    target = spec.clusters[spec.target]
    direction = random_direction(target.dim, rng)
    drift = DriftSpec(spec.target, u, kind, tuple(direction))
    clusters = inject_drift(spec, drift)
    meta = {"target": spec.target, "kind": kind, "u": u}
    if kind in ("mean", "both"):
        meta["shift"] = (u * target.std() * direction).tolist()
    return _sample_clusters(clusters, counts, rng, t, drift_label=True), meta


def build_stream(spec: StreamSpec) -> LabeledStream:
    chunks = [gen_base(spec)]
    meta = {}
    for t, drifted in enumerate(drift_schedule(spec), start=1):
        chunk, m = gen_chunk(spec, t, bool(drifted))
        chunks.append(chunk)
        if m:
            meta[t] = m
    return LabeledStream(chunks, meta)


def two_gaussian_spec(ir: float = 15.0, drift_kind: str = "covariance", n_clean: int = 250,
                      n_drift: int = 250, seed: int = 0, **kw) -> StreamSpec:
    """Two 2-D Gaussians, the second one the (drifting) minority."""
    clusters = (
        ClusterSpec(mean=(0.0, 0.0), cov=((1.0, 0.0), (0.0, 1.0))),
        ClusterSpec(mean=(5.0, 5.0), cov=((0.5, 0.0), (0.0, 0.5))),
    )
    return StreamSpec(clusters, ir=ir, n_clean=n_clean, n_drift=n_drift,
                      drift_kinds=(drift_kind,), seed=seed, **kw)


# -- real tables ------------------------------------------------------------

@dataclass(frozen=True)
class RealStreamSpec:
    """Drift injection recipe for a labeled table.

    ``classes`` picks the concept classes (default: the ``k_prime`` most
    frequent); the remaining classes are the pool substituted in by
    ``substitute`` drift. Minority classes get weight 1, others ``ir``.
    """

    k_prime: int = 2
    classes: tuple | None = None
    ir: float = 15.0
    minority: tuple | None = None
    n_base: int = 2000
    n_chunk: int = 500
    n_clean: int = 250
    n_drift: int = 250
    drift_modes: tuple = ("permute", "substitute")
    u_range: tuple = (0.1, 1.0)
    seed: int = 0


def random_involution(d: int, rng) -> np.ndarray:
    """Random permutation made of disjoint swaps, so applying it twice is the identity."""
    perm = np.arange(d)
    idx = rng.permutation(d)
    for a, b in zip(idx[0::2], idx[1::2]):
        perm[a], perm[b] = b, a
    return perm


def read_labeled_table(csv_path, class_column):
    with open(csv_path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], [r for r in rows[1:] if r]
    if class_column not in header:
        raise InvalidInputError(f"class column {class_column!r} not in header")
    ci = header.index(class_column)
    y = np.array([r[ci] for r in body])
    try:
        X = np.array([[float(v) for i, v in enumerate(r) if i != ci] for r in body])
    except ValueError as exc:
        raise InvalidInputError(f"{csv_path}: non-numeric feature ({exc})") from None
    return X, y


def ingest_real(csv_path, class_column: str, spec: RealStreamSpec = RealStreamSpec()) -> LabeledStream:
    X, y = read_labeled_table(csv_path, class_column)
    return inject_real_drift(X, y, spec)


def inject_real_drift(X, y, spec: RealStreamSpec) -> LabeledStream:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    values, freq = np.unique(y, return_counts=True)
    if spec.classes is not None:
        chosen = [c for c in spec.classes]
        missing = set(map(str, chosen)) - set(map(str, values))
        if missing:
            raise InvalidInputError(f"classes not present: {sorted(missing)}")
        chosen = [values[list(map(str, values)).index(str(c))] for c in chosen]
    else:
        chosen = list(values[np.argsort(-freq, kind="stable")[:spec.k_prime]])
    if len(chosen) < 2:
        raise InvalidInputError("need at least 2 classes")
    held_out = [v for v in values if v not in chosen]
    pools = [np.flatnonzero(y == c) for c in chosen]
    reserve = np.flatnonzero(np.isin(y, held_out))
    minority = spec.minority if spec.minority is not None else (len(chosen) - 1,)
    w = np.full(len(chosen), float(spec.ir))
    w[list(minority)] = 1.0
    need = np.maximum(cluster_counts(w, spec.n_base), cluster_counts(w, spec.n_chunk))
    short = [f"class {chosen[i]!r}: need {need[i]}, have {len(p)}"
             for i, p in enumerate(pools) if len(p) < need[i]]
    if short:
        raise CapacityError("insufficient rows: " + "; ".join(short))
    if "substitute" in spec.drift_modes and len(reserve) == 0:
        raise CapacityError("substitute drift needs at least one held-out class")

    def draw(n, t, label):
        rng = chunk_rng(spec.seed, t)
        counts = cluster_counts(w, n)
        idx = np.concatenate([rng.choice(p, size=m, replace=False) for p, m in zip(pools, counts)])
        labels = np.concatenate([np.full(m, i) for i, m in enumerate(counts)])
        return rng, X[idx].copy(), labels

    _, Xb, lb = draw(spec.n_base, 0, False)
    chunks = [Chunk(Xb, 0, False, lb)]
    meta = {}
    flags = chunk_rng(spec.seed, _SCHEDULE_STREAM).permutation(
        np.array([False] * spec.n_clean + [True] * spec.n_drift))
    for t, drifted in enumerate(flags, start=1):
        rng, Xc, lc = draw(spec.n_chunk, t, drifted)
        if drifted:
            u = float(rng.uniform(*spec.u_range))
            m = int(round(u * len(Xc)))
            rows = rng.choice(len(Xc), size=m, replace=False)
            mode = spec.drift_modes[int(rng.integers(len(spec.drift_modes)))]
            record = {"mode": mode, "u": u, "rows": sorted(int(r) for r in rows)}
            if mode == "permute":
                perm = random_involution(X.shape[1], rng)
                Xc[rows] = Xc[rows][:, perm]
                record["permutation"] = perm.tolist()
            else:
                Xc[rows] = X[rng.choice(reserve, size=m, replace=len(reserve) < m)]
            meta[t] = record
        chunks.append(Chunk(Xc, t, bool(drifted), lc))
    return LabeledStream(chunks, meta)
