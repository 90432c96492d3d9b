"""Concept models, per-cluster drift detection, and detect-then-train streaming."""
from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from . import kernels
from .chunk import (
    Chunk,
    ClusterPartition,
    InvalidInputError,
    Normalizer,
    apply_normalizer,
    fit_normalizer,
)
from .competitive import LearnConfig, PrototypeSet, learn_prototypes
from .density import density_stats, seed_prototypes
from .fusion import FusionResult, fuse
from .occ import Descriptor, DescriptorConfig, fit_descriptor

log = logging.getLogger(__name__)

EMPTY_POLICIES = ("ignore", "alarm")


@dataclass(frozen=True)
class DetectorConfig:
    """Detection knobs.

    ``empty_policy`` decides how a cluster with no incoming samples is
    scored: "ignore" gives theta 0, "alarm" gives theta 1.
    ``retrain_on_drift`` promotes a drifted chunk to the new base chunk.
    """

    gamma: float = 0.2
    empty_policy: str = "ignore"
    retrain_on_drift: bool = True
    normalizer: str = "standardize"

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise InvalidInputError("gamma must lie in (0, 1)")
        if self.empty_policy not in EMPTY_POLICIES:
            raise InvalidInputError(f"empty_policy must be one of {EMPTY_POLICIES}")


@dataclass
class ConceptModel:
    """Everything learned from one base chunk.

    Prototypes, descriptors and ``base_assignment`` live in normalized space.
    """

    normalizer: Normalizer
    prototypes: PrototypeSet
    fusion: FusionResult
    descriptors: list[Descriptor]
    base_assignment: np.ndarray
    base_index: int = 0

    def __post_init__(self):
        if len(self.descriptors) != self.fusion.k_star:
            raise InvalidInputError("one descriptor per final cluster required")
        self._lookup = self.fusion.prototype_to_cluster(len(self.prototypes))
        if np.any(self._lookup < 0):
            raise InvalidInputError("fusion queues do not cover every prototype")

    @property
    def k_star(self) -> int:
        return self.fusion.k_star

    @property
    def proto_cluster(self) -> np.ndarray:
        return self._lookup

    def to_dict(self) -> dict:
        return {
            "base_index": self.base_index,
            "normalizer": self.normalizer.to_dict(),
            "prototypes": self.prototypes.prototypes.tolist(),
            "fusion": self.fusion.to_dict(),
            "descriptors": [d.to_dict() for d in self.descriptors],
        }


@dataclass(frozen=True)
class ClusterDriftStat:
    cluster: int
    theta: float
    members: int


@dataclass(frozen=True)
class RegionVector:
    sample_id: int
    prototype: int
    vector: np.ndarray
    magnitude: float


@dataclass
class DriftReport:
    chunk_index: int
    drifted: bool
    stats: list[ClusterDriftStat]
    drifted_clusters: list[int]
    drift_samples: dict[int, list[int]]
    region_vectors: list[RegionVector] = field(default_factory=list)
    base_index: int = 0
    label: bool | None = None

    @property
    def max_theta(self) -> float:
        return max((s.theta for s in self.stats), default=0.0)

    def to_dict(self) -> dict:
        return {
            "chunk_index": self.chunk_index,
            "base_index": self.base_index,
            "drifted": self.drifted,
            "label": self.label,
            "max_theta": self.max_theta,
            "stats": [{"cluster": s.cluster, "theta": s.theta, "members": s.members} for s in self.stats],
            "drifted_clusters": self.drifted_clusters,
            "drift_samples": {str(k): v for k, v in self.drift_samples.items()},
            "region_vectors": [
                {"sample_id": r.sample_id, "prototype": r.prototype,
                 "vector": r.vector.tolist(), "magnitude": r.magnitude}
                for r in self.region_vectors
            ],
        }

    def to_json(self) -> str:
        # repr-based float serialization in json is round-trip exact
        return json.dumps(self.to_dict(), indent=1)


SUMMARY_HEADER = ["chunk_index", "drifted", "max_theta", "n_drifted_clusters", "drifted_clusters"]


def summary_csv(reports: Iterable[DriftReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_HEADER)
    for r in reports:
        w.writerow([r.chunk_index, int(r.drifted), repr(r.max_theta), len(r.drifted_clusters),
                    " ".join(str(c) for c in r.drifted_clusters)])
    return buf.getvalue()


# -- training ---------------------------------------------------------------

def learn_concepts(norm_chunk: Chunk, learn_cfg: LearnConfig, seeds: PrototypeSet | None = None):
    """Seed, learn and fuse on an already normalized chunk."""
    if seeds is None:
        kappa0 = min(learn_cfg.kappa0, norm_chunk.n)
        seeds = seed_prototypes(norm_chunk, kappa0, density_stats(norm_chunk))
    protos, part = learn_prototypes(norm_chunk, learn_cfg, seeds)
    return protos, part, fuse(norm_chunk, part, protos)


def fit_cluster_descriptors(X, assignment, k, desc_cfg: DescriptorConfig) -> list[Descriptor]:
    return [fit_descriptor(X[assignment == i], desc_cfg, cluster=i) for i in range(k)]


def train_model(base: Chunk, learn_cfg: LearnConfig = LearnConfig(),
                desc_cfg: DescriptorConfig = DescriptorConfig(),
                normalizer_kind: str = "standardize") -> ConceptModel:
    norm = fit_normalizer(base, normalizer_kind)
    nb = apply_normalizer(norm, base)
    protos, part, fusion = learn_concepts(nb, learn_cfg)
    lookup = fusion.prototype_to_cluster(len(protos))
    assignment = lookup[part.assignment]
    descs = fit_cluster_descriptors(nb.X, assignment, fusion.k_star, desc_cfg)
    return ConceptModel(norm, protos, fusion, descs, assignment, base.chunk_index)


# -- detection --------------------------------------------------------------

def partition_incoming(model: ConceptModel, incoming: Chunk) -> ClusterPartition:
    """Nearest-prototype sub-clusters, merged through the fusion queues.

    ``incoming`` must already be normalized with the model's normalizer.
    """
    X = np.ascontiguousarray(incoming.X)
    if X.shape[1] != model.prototypes.prototypes.shape[1]:
        raise InvalidInputError("dimension mismatch between chunk and model")
    nearest, _ = kernels.assign_nearest(X, model.prototypes.prototypes)
    return ClusterPartition(model.proto_cluster[nearest], [list(q) for q in model.fusion.queues])


def ood_proportion(desc: Descriptor, cluster_samples, empty_policy: str = "ignore") -> float:
    X = np.asarray(cluster_samples, dtype=np.float64)
    if X.size == 0:
        if empty_policy == "alarm":
            return 1.0
        log.warning("cluster %d received no samples; theta set to 0", desc.cluster)
        return 0.0
    return float(desc.flags(X.reshape(-1, desc.dim)).mean())


def region_vectors(model: ConceptModel, drift_samples, X_norm) -> list[RegionVector]:
    """Displacement of each drift sample from its nearest prototype, in raw feature units."""
    ids = np.asarray(sorted(drift_samples), dtype=np.int64)
    if len(ids) == 0:
        return []
    Xs = np.ascontiguousarray(X_norm[ids])
    nearest, _ = kernels.assign_nearest(Xs, model.prototypes.prototypes)
    raw_x = model.normalizer.inverse(Xs)
    raw_s = model.normalizer.inverse(model.prototypes.prototypes[nearest])
    out = []
    for h, p, gx in zip(ids, nearest, raw_x - raw_s):
        out.append(RegionVector(int(h), int(p), gx, float(np.sqrt(gx @ gx))))
    return out


def detect(model: ConceptModel, incoming: Chunk, cfg: DetectorConfig = DetectorConfig(),
           normalized: bool = False) -> DriftReport:
    """Score one incoming chunk against ``model``.

    ``incoming`` is in raw units unless ``normalized`` is set.
    """
    inc = incoming if normalized else apply_normalizer(model.normalizer, incoming)
    part = partition_incoming(model, inc)
    stats, drifted, samples = [], [], {}
    for i, desc in enumerate(model.descriptors):
        ids = part.members(i)
        theta = ood_proportion(desc, inc.X[ids], cfg.empty_policy)
        stats.append(ClusterDriftStat(i, theta, len(ids)))
        if theta > cfg.gamma:
            drifted.append(i)
            if len(ids):
                samples[i] = [int(h) for h in ids[desc.flags(inc.X[ids]) == 1]]
            else:
                samples[i] = []
    all_ids = sorted(h for v in samples.values() for h in v)
    return DriftReport(
        chunk_index=incoming.chunk_index,
        drifted=bool(drifted),
        stats=stats,
        drifted_clusters=drifted,
        drift_samples=samples,
        region_vectors=region_vectors(model, all_ids, inc.X),
        base_index=model.base_index,
        label=incoming.drift_label,
    )


Trainer = Callable[[Chunk], ConceptModel]


@dataclass
class StreamResult:
    reports: list[DriftReport]
    models: list[ConceptModel]
    failures: list[tuple[int, str]] = field(default_factory=list)

    @property
    def promotions(self) -> list[int]:
        return [m.base_index for m in self.models[1:]]


def process_stream(stream, learn_cfg: LearnConfig = LearnConfig(),
                   desc_cfg: DescriptorConfig = DescriptorConfig(),
                   det_cfg: DetectorConfig = DetectorConfig(),
                   trainer: Trainer | None = None,
                   detector: Callable | None = None) -> StreamResult:
    """Detect-then-train over a sequence of chunks.

    Chunk 0 is the first base chunk. Every later chunk is scored against
    the current model; when ``det_cfg.retrain_on_drift`` is set, a drifted
    chunk becomes the new base chunk and the model is rebuilt from scratch.
    A failed retrain keeps the previous model.

    ``trainer``/``detector`` swap in alternative model builders (used by
    the ablation variants); defaults are ``train_model`` and ``detect``.
    """
    chunks = list(stream)
    if not chunks:
        raise InvalidInputError("stream has no chunks")
    if trainer is None:
        def trainer(c):
            return train_model(c, learn_cfg, desc_cfg, det_cfg.normalizer)
    detector = detector or detect
    model = trainer(chunks[0])
    result = StreamResult([], [model])
    for chunk in chunks[1:]:
        report = detector(model, chunk, det_cfg)
        result.reports.append(report)
        if report.drifted and det_cfg.retrain_on_drift:
            try:
                model = trainer(chunk)
            except (ValueError, FloatingPointError) as exc:
                log.error("retraining on chunk %d failed (%s); keeping previous model",
                          chunk.chunk_index, exc)
                result.failures.append((chunk.chunk_index, str(exc)))
                continue
            result.models.append(model)
    return result
