"""Chunk-level metrics, ablation variants and parameter sweeps."""
from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .chunk import Chunk, InvalidInputError, apply_normalizer, fit_normalizer
from .competitive import LearnConfig, PrototypeSet
from .density import random_seed_prototypes
from .detector import (
    ConceptModel,
    DetectorConfig,
    StreamResult,
    fit_cluster_descriptors,
    learn_concepts,
    process_stream,
    train_model,
)
from .fusion import FusionResult, MergeStage
from .occ import DescriptorConfig, fit_descriptor
from .streamgen import StreamSpec, build_stream


class UndefinedMetricError(ValueError):
    """Metric needs both classes present."""


@dataclass
class ChunkVerdicts:
    predicted: np.ndarray
    scores: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.predicted = np.asarray(self.predicted, dtype=bool)
        self.scores = np.asarray(self.scores, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=bool)
        if not (len(self.predicted) == len(self.scores) == len(self.labels)):
            raise InvalidInputError("verdict arrays must have equal lengths")
        if not np.all(np.isfinite(self.scores)):
            raise InvalidInputError("scores must be finite")

    @classmethod
    def from_result(cls, result: StreamResult) -> "ChunkVerdicts":
        reps = result.reports
        return cls([r.drifted for r in reps], [r.max_theta for r in reps], [bool(r.label) for r in reps])


def accuracy(v: ChunkVerdicts) -> float:
    if len(v.labels) == 0:
        raise InvalidInputError("no chunks")
    return float(np.mean(v.predicted == v.labels))


def gmean(v: ChunkVerdicts) -> float:
    """sqrt(TPR * TNR) with drifted as the positive class; 0 if a class is absent."""
    if len(v.labels) == 0:
        raise InvalidInputError("no chunks")
    pos, neg = v.labels, ~v.labels
    if not pos.any() or not neg.any():
        return 0.0
    tpr = float(np.mean(v.predicted[pos]))
    tnr = float(np.mean(~v.predicted[neg]))
    return float(np.sqrt(tpr * tnr))


def _average_ranks(x):
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(len(x))
    xs = x[order]
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and xs[j + 1] == xs[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def auc(v: ChunkVerdicts) -> float:
    """Rank-based (Mann-Whitney) area under the ROC curve, ties counted as 1/2."""
    pos, neg = v.labels, ~v.labels
    n_pos, n_neg = int(pos.sum()), int(neg.sum())
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs both drifted and clean chunks")
    ranks = _average_ranks(v.scores)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def metrics(v: ChunkVerdicts) -> dict:
    out = {"accuracy": accuracy(v), "gmean": gmean(v)}
    try:
        out["auc"] = auc(v)
    except UndefinedMetricError:
        out["auc"] = float("nan")
    return out


# -- ablations --------------------------------------------------------------

class AblationVariant(str, enum.Enum):
    FULL = "FULL"
    A = "A-random-init"
    B = "B-kmeans"
    C = "C-single-descriptor"


def lloyd_kmeans(X, k: int, rng, max_iter: int = 100):
    """Plain Lloyd iterations from k random distinct samples; returns (centers, labels)."""
    n = len(X)
    if not 1 <= k <= n:
        raise InvalidInputError(f"k={k} outside [1, {n}]")
    C = np.ascontiguousarray(X[rng.choice(n, size=k, replace=False)])
    labels = None
    for _ in range(max_iter):
        new, d2 = kernels.assign_nearest(X, C)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for j in range(k):
            pts = X[labels == j]
            if len(pts):
                C[j] = pts.mean(axis=0)
            else:
                far = int(np.argmax(d2))
                C[j] = X[far]
                d2[far] = 0.0
    labels, _ = kernels.assign_nearest(X, C)
    return C, labels


def _singleton_fusion(k):
    queues = [[i] for i in range(k)]
    return FusionResult(k, queues, [MergeStage(k, None, 0.0, 0.0, queues)])


def make_trainer(variant: AblationVariant, learn_cfg: LearnConfig, desc_cfg: DescriptorConfig,
                 det_cfg: DetectorConfig, seed: int = 0):
    """Model builder for one ablation variant; randomness derives from (seed, base index)."""
    variant = AblationVariant(variant)

    def rng_for(chunk):
        return np.random.default_rng([seed, chunk.chunk_index])

    def full(chunk):
        return train_model(chunk, learn_cfg, desc_cfg, det_cfg.normalizer)

    def random_init(chunk):
        norm = fit_normalizer(chunk, det_cfg.normalizer)
        nb = apply_normalizer(norm, chunk)
        seeds = random_seed_prototypes(nb, min(learn_cfg.kappa0, nb.n), rng_for(chunk))
        protos, part, fusion = learn_concepts(nb, learn_cfg, seeds)
        assignment = fusion.prototype_to_cluster(len(protos))[part.assignment]
        descs = fit_cluster_descriptors(nb.X, assignment, fusion.k_star, desc_cfg)
        return ConceptModel(norm, protos, fusion, descs, assignment, chunk.chunk_index)

    def kmeans(chunk):
        norm = fit_normalizer(chunk, det_cfg.normalizer)
        nb = apply_normalizer(norm, chunk)
        k = min(learn_cfg.kappa0, nb.n)
        centers, labels = lloyd_kmeans(nb.X, k, rng_for(chunk))
        descs = fit_cluster_descriptors(nb.X, labels, k, desc_cfg)
        return ConceptModel(norm, PrototypeSet(centers), _singleton_fusion(k), descs, labels,
                            chunk.chunk_index)

    def single(chunk):
        norm = fit_normalizer(chunk, det_cfg.normalizer)
        nb = apply_normalizer(norm, chunk)
        desc = fit_descriptor(nb.X, desc_cfg, cluster=0)
        center = PrototypeSet(nb.X.mean(axis=0, keepdims=True))
        return ConceptModel(norm, center, _singleton_fusion(1), [desc],
                            np.zeros(nb.n, dtype=np.int64), chunk.chunk_index)

    return {AblationVariant.FULL: full, AblationVariant.A: random_init,
            AblationVariant.B: kmeans, AblationVariant.C: single}[variant]


def memoize_trainer(trainer):
    """Cache models by base-chunk index so repeated stream runs share training."""
    cache = {}

    def cached(chunk):
        if chunk.chunk_index not in cache:
            cache[chunk.chunk_index] = trainer(chunk)
        return cache[chunk.chunk_index]

    return cached


@dataclass
class VariantRun:
    variant: AblationVariant
    verdicts: ChunkVerdicts
    metrics: dict
    result: StreamResult = field(repr=False)


def run_variant(variant, stream, learn_cfg: LearnConfig = LearnConfig(),
                desc_cfg: DescriptorConfig = DescriptorConfig(),
                det_cfg: DetectorConfig = DetectorConfig(), seed: int = 0,
                trainer=None) -> VariantRun:
    variant = AblationVariant(variant)
    chunks = stream.chunks if hasattr(stream, "chunks") else list(stream)
    trainer = trainer or make_trainer(variant, learn_cfg, desc_cfg, det_cfg, seed)
    result = process_stream(chunks, learn_cfg, desc_cfg, det_cfg, trainer=trainer)
    verdicts = ChunkVerdicts.from_result(result)
    return VariantRun(variant, verdicts, metrics(verdicts), result)


def run_all_variants(stream, learn_cfg=LearnConfig(), desc_cfg=DescriptorConfig(),
                     det_cfg=DetectorConfig(), seed=0) -> list[VariantRun]:
    return [run_variant(v, stream, learn_cfg, desc_cfg, det_cfg, seed) for v in AblationVariant]


# -- sweeps -----------------------------------------------------------------

GAMMA_GRID = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.8)


def sweep(axis: str, values, stream_spec: StreamSpec, learn_cfg=LearnConfig(),
          desc_cfg=DescriptorConfig(), det_cfg=DetectorConfig(),
          variants=(AblationVariant.FULL,), seed: int = 0) -> list[dict]:
    """One metrics row per (grid value, variant).

    ``axis="gamma"`` runs every threshold over one stream, sharing trained
    models between thresholds; ``axis="ir"`` regenerates the stream for
    each imbalance ratio.
    """
    if axis not in ("gamma", "ir"):
        raise InvalidInputError(f"unknown sweep axis {axis!r}")
    values = list(values)
    if not values:
        raise InvalidInputError("empty sweep grid")
    rows = []
    if axis == "gamma":
        stream = build_stream(stream_spec)
        trainers = {v: memoize_trainer(make_trainer(v, learn_cfg, desc_cfg, det_cfg, seed)) for v in variants}
        for g in values:
            cfg = replace(det_cfg, gamma=float(g))
            for v in variants:
                run = run_variant(v, stream, learn_cfg, desc_cfg, cfg, seed, trainer=trainers[v])
                rows.append({"axis": axis, "value": float(g), "variant": AblationVariant(v).value, **run.metrics})
    else:
        for ir in values:
            stream = build_stream(replace(stream_spec, ir=float(ir)))
            for v in variants:
                run = run_variant(v, stream, learn_cfg, desc_cfg, det_cfg, seed)
                rows.append({"axis": axis, "value": float(ir), "variant": AblationVariant(v).value, **run.metrics})
    return rows


METRIC_COLUMNS = ["axis", "value", "variant", "accuracy", "auc", "gmean"]


def rows_to_csv(rows, columns=None) -> str:
    columns = columns or METRIC_COLUMNS
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def trace_rows(run: VariantRun) -> list[dict]:
    """Per-chunk trace with running accuracy, for accuracy-over-time curves."""
    rows, correct = [], 0
    for i, r in enumerate(run.result.reports):
        ok = bool(r.drifted) == bool(r.label)
        correct += ok
        rows.append({"chunk_index": r.chunk_index, "label": int(bool(r.label)), "predicted": int(r.drifted),
                     "score": r.max_theta, "correct": int(ok), "running_accuracy": correct / (i + 1),
                     "base_index": r.base_index})
    return rows


TRACE_COLUMNS = ["chunk_index", "label", "predicted", "score", "correct", "running_accuracy", "base_index"]
