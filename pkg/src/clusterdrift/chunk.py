"""Chunks, partitions, feature scaling and the on-disk chunk formats."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np


class InvalidInputError(ValueError):
    """Input data violates a precondition (shape, finiteness, size)."""


class DegenerateGeometryError(ValueError):
    """Two points that must differ coincide (zero-length segment)."""


def distance(a, b) -> float:
    """Euclidean distance between two feature vectors."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise InvalidInputError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    return float(np.sqrt(np.sum((a - b) ** 2)))


@dataclass(frozen=True)
class Chunk:
    """An ordered batch of samples; row ``h`` of ``X`` is sample id ``h``.

    ``labels`` holds generator class ids (not used by detection).
    """

    X: np.ndarray
    chunk_index: int = 0
    drift_label: bool | None = None
    labels: np.ndarray | None = None

    def __post_init__(self):
        X = np.array(self.X, dtype=np.float64, order="C")
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
            raise InvalidInputError(f"chunk must be a nonempty 2-D array, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise InvalidInputError("chunk contains NaN or Inf")
        X.setflags(write=False)
        object.__setattr__(self, "X", X)
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (X.shape[0],):
                raise InvalidInputError("labels must have one entry per sample")
            object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def with_features(self, X) -> "Chunk":
        return replace(self, X=X)


@dataclass(frozen=True)
class SubClusterPartition:
    """Each sample's nearest-prototype index, plus per-prototype counts."""

    assignment: np.ndarray
    counts: np.ndarray

    @classmethod
    def from_assignment(cls, assignment, n_prototypes: int) -> "SubClusterPartition":
        assignment = np.asarray(assignment, dtype=np.int64)
        return cls(assignment, np.bincount(assignment, minlength=n_prototypes))


@dataclass(frozen=True)
class ClusterPartition:
    """Merged-cluster index per sample and the prototype queue of each cluster."""

    assignment: np.ndarray
    member_queues: list[list[int]]

    @property
    def k(self) -> int:
        return len(self.member_queues)

    def members(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == i)


NORMALIZER_KINDS = ("standardize", "min-max", "identity")


@dataclass(frozen=True)
class Normalizer:
    location: np.ndarray
    scale: np.ndarray
    kind: str = "standardize"

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.location.shape[0]:
            raise InvalidInputError(
                f"dimension mismatch: data has {X.shape[-1]} features, "
                f"normalizer has {self.location.shape[0]}"
            )
        return (X - self.location) / self.scale

    def inverse(self, Z) -> np.ndarray:
        Z = np.asarray(Z, dtype=np.float64)
        return Z * self.scale + self.location

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "location": self.location.tolist(),
            "scale": self.scale.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Normalizer":
        return cls(np.asarray(d["location"], float), np.asarray(d["scale"], float), d["kind"])


def fit_normalizer(base: Chunk, kind: str = "standardize") -> Normalizer:
    """Fit per-feature location/scale on ``base``; constant features get scale 1."""
    X = base.X
    if kind == "standardize":
        loc = X.mean(axis=0)
        scale = X.std(axis=0)  # population std
    elif kind == "min-max":
        loc = X.min(axis=0)
        scale = X.max(axis=0) - loc
    elif kind == "identity":
        loc = np.zeros(X.shape[1])
        scale = np.ones(X.shape[1])
    else:
        raise InvalidInputError(f"unknown normalizer kind {kind!r}")
    scale = np.where(scale > 0, scale, 1.0)
    return Normalizer(loc, scale, kind)


def apply_normalizer(norm: Normalizer, chunk: Chunk) -> Chunk:
    return chunk.with_features(norm.transform(chunk.X))


# -- file formats -----------------------------------------------------------

def write_chunk_csv(chunk: Chunk, path, feature_names=None) -> None:
    path = Path(path)
    names = feature_names or [f"x{f}" for f in range(chunk.dim)]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(names) + (["label"] if chunk.labels is not None else []))
        for h in range(chunk.n):
            row = [repr(float(v)) for v in chunk.X[h]]
            if chunk.labels is not None:
                row.append(str(int(chunk.labels[h])))
            w.writerow(row)


def read_chunk_csv(path, chunk_index: int = 0, drift_label: bool | None = None) -> Chunk:
    """Read a chunk CSV: header row, numeric feature columns, optional final ``label``."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InvalidInputError(f"{path}: empty file")
    header, body = rows[0], [r for r in rows[1:] if r]
    has_label = header[-1].strip() == "label"
    try:
        data = np.array([[float(v) for v in r] for r in body], dtype=np.float64)
    except ValueError as exc:
        raise InvalidInputError(f"{path}: non-numeric value ({exc})") from None
    if data.ndim != 2 or data.shape[1] != len(header):
        raise InvalidInputError(f"{path}: ragged rows or column count does not match header")
    labels = data[:, -1].astype(np.int64) if has_label else None
    X = data[:, :-1] if has_label else data
    return Chunk(X, chunk_index=chunk_index, drift_label=drift_label, labels=labels)


@dataclass
class ManifestEntry:
    chunk_path: str
    drift_label: bool | None = None
    meta: dict = field(default_factory=dict)


def write_manifest(entries, path) -> None:
    path = Path(path)
    doc = []
    for e in entries:
        item = {"chunk_path": e.chunk_path, "drift_label": e.drift_label}
        if e.meta:
            item["meta"] = e.meta
        doc.append(item)
    path.write_text(json.dumps(doc, indent=1) + "\n")


def read_manifest(path) -> list[ManifestEntry]:
    path = Path(path)
    doc = json.loads(path.read_text())
    if not isinstance(doc, list):
        raise InvalidInputError(f"{path}: manifest must be a JSON list")
    return [ManifestEntry(d["chunk_path"], d.get("drift_label"), d.get("meta", {})) for d in doc]


def load_stream(manifest_path) -> list[Chunk]:
    """Load every chunk listed in a manifest; relative paths resolve against its directory."""
    manifest_path = Path(manifest_path)
    chunks = []
    for t, entry in enumerate(read_manifest(manifest_path)):
        p = Path(entry.chunk_path)
        if not p.is_absolute():
            p = manifest_path.parent / p
        chunks.append(read_chunk_csv(p, chunk_index=t, drift_label=entry.drift_label))
    return chunks
