import logging
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from clusterdrift import kernels
from clusterdrift.chunk import Chunk, DegenerateGeometryError, InvalidInputError, distance
from clusterdrift.competitive import (
    LearnConfig,
    PrototypeSet,
    assign_winner,
    learn_prototypes,
    penalty_coefficient,
    update_prototypes,
)
from clusterdrift.density import seed_prototypes

from .conftest import blobs


def test_assign_winner_examples():
    P = np.array([[0.0, 0.0], [4.0, 0.0]])
    assert assign_winner(P, (1.0, 0.0)) == 0
    assert assign_winner(P, (2.0, 0.0)) == 0  # equidistant: lowest index
    assert assign_winner(P, (4.0, 0.0)) == 1


def test_assign_winner_errors():
    with pytest.raises(InvalidInputError):
        assign_winner(np.zeros((0, 2)), (0.0, 0.0))
    with pytest.raises(InvalidInputError):
        assign_winner(np.zeros((2, 2)), (0.0, 0.0, 0.0))


def test_penalty_examples():
    assert penalty_coefficient((2, 0), (0, 0), (1, 0)) == 1.0
    assert penalty_coefficient((2, 0), (0, 0), (0.5, 0)) == pytest.approx(math.exp(-0.5), abs=1e-15)
    assert penalty_coefficient((2, 0), (0, 0), (0, 0)) == pytest.approx(math.exp(-1.0), abs=1e-15)
    with pytest.raises(DegenerateGeometryError):
        penalty_coefficient((1, 1), (1, 1), (0, 0))


def test_update_examples():
    ps = PrototypeSet([[0.0, 0.0], [2.0, 0.0]])
    ps, step = update_prototypes(ps, (1.0, 0.0), 0.1)
    assert step.winner == 0 and step.betas == {1: 1.0}
    assert ps.prototypes[0].tolist() == pytest.approx([0.1, 0.0])
    assert ps.prototypes[1].tolist() == pytest.approx([2.1, 0.0])
    assert ps.wins.tolist() == [1, 0]


def test_update_at_winner_is_fixed_point():
    ps = PrototypeSet([[1.0, 1.0], [3.0, 0.0]])
    _, step = update_prototypes(ps, (1.0, 1.0), 0.3)
    assert np.array_equal(step.displacements[0], [0.0, 0.0])
    assert ps.prototypes[1].tolist() != [3.0, 0.0]


def test_update_rejects_bad_alpha():
    with pytest.raises(InvalidInputError):
        update_prototypes(PrototypeSet([[0.0], [1.0]]), (0.5,), 1.0)


# a 1e-3 grid keeps distinct prototypes resolvably apart; squared gaps near
# 1e-305 underflow to 0 and count as coincident
coords = st.integers(-50_000, 50_000).map(lambda i: i / 1000)


@given(st.lists(st.tuples(coords, coords), min_size=2, max_size=6, unique=True),
       st.tuples(coords, coords), st.floats(0.01, 0.99))
def test_update_geometry(protos, x, alpha):
    P = np.array(protos)
    x = np.array(x)
    ps = PrototypeSet(P.copy())
    v = assign_winner(P, x)
    ps, step = update_prototypes(ps, x, alpha)
    assert distance(ps.prototypes[v], x) == pytest.approx((1 - alpha) * distance(P[v], x), rel=1e-9, abs=1e-9)
    for j, beta in step.betas.items():
        assert 0.0 < beta <= 1.0
        assert distance(ps.prototypes[j], x) == pytest.approx(
            (1 + beta * alpha) * distance(P[j], x), rel=1e-9, abs=1e-9)


@given(st.integers(0, 10_000))
def test_epoch_kernel_matches_sequential_rule(seed):
    # rival_rate = 1 is the plain per-sample rule, applied in order
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(40, 2))
    P0 = rng.normal(size=(4, 2)) * 3
    order = rng.permutation(40).astype(np.int64)
    P = P0.copy()
    wins = kernels.competitive_epoch(P, X, order, 0.05, 1.0)
    ps = PrototypeSet(P0.copy())
    for h in order:
        update_prototypes(ps, X[h], 0.05, int(h))
    assert np.allclose(P, ps.prototypes, rtol=1e-10, atol=1e-10)
    assert wins.tolist() == ps.wins.tolist()


def test_epoch_kernel_rejects_coincident_prototypes():
    P = np.array([[0.0, 0.0], [0.0, 0.0]])
    with pytest.raises(ValueError):
        kernels.competitive_epoch(P, np.ones((3, 2)), np.arange(3, dtype=np.int64), 0.1)


def _learn(X, kappa0=5, **kw):
    c = Chunk(X)
    cfg = LearnConfig(kappa0=kappa0, **kw)
    return learn_prototypes(c, cfg, seed_prototypes(c, kappa0))


def test_tight_blob_eliminates(caplog):
    for s in range(10):
        caplog.clear()
        caplog.set_level(logging.DEBUG, logger="clusterdrift")
        X = np.random.default_rng(s).normal(size=(200, 2)) * 0.1
        protos, part = _learn(X, kappa0=5)
        assert any("eliminating" in r.getMessage() for r in caplog.records)


def test_separated_blobs_keep_both():
    for s in range(5):
        rng = np.random.default_rng(s)
        X, y = blobs(rng, [(0.0, 0.0), (15.0, 0.0)], [150, 50])
        c = Chunk(X)
        seeds = PrototypeSet([X[y == 0][0], X[y == 1][0]])
        protos, part = learn_prototypes(c, LearnConfig(kappa0=2), seeds)
        owners = {int(p[0] > 7.5) for p in protos.prototypes}
        assert owners == {0, 1}
        assert len(protos) >= 2


def test_growth_cap_hit_on_saturated_chunk(caplog):
    caplog.set_level(logging.WARNING, logger="clusterdrift")
    X = np.arange(6, dtype=float)[:, None] * 10
    protos, part = _learn(X, kappa0=6)
    assert len(protos) == 6
    assert any("growth cap" in r.getMessage() for r in caplog.records)


def test_learn_rejects_dimension_mismatch():
    with pytest.raises(InvalidInputError):
        learn_prototypes(Chunk(np.zeros((5, 2)) + np.arange(5)[:, None]), LearnConfig(),
                         PrototypeSet(np.zeros((2, 3))))


@pytest.mark.parametrize("kw", [dict(kappa0=1), dict(alpha=0.0), dict(alpha=1.0), dict(max_iters=0),
                                dict(growth_cap=0)])
def test_config_validation(kw):
    with pytest.raises(InvalidInputError):
        LearnConfig(**kw)


@given(st.integers(0, 10_000), st.integers(20, 120), st.integers(2, 8))
def test_learning_terminates_with_total_partition(seed, n, kappa0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 2)) * rng.uniform(0.1, 5.0)
    protos, part = _learn(X, kappa0=kappa0, max_iters=20)
    assert len(part.assignment) == n
    assert part.counts.sum() == n and np.all(part.counts > 0)
    assert len(part.counts) == len(protos)
    assert np.all(np.isfinite(protos.prototypes))


def test_learning_is_deterministic():
    X = np.random.default_rng(1).normal(size=(150, 2))
    a, _ = _learn(X, shuffle_seed=4)
    b, _ = _learn(X, shuffle_seed=4)
    assert np.array_equal(a.prototypes, b.prototypes)
