import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from clusterdrift import _kernels_py, kernels

compiled = pytest.importorskip("clusterdrift._kernels")


def test_backend_selected():
    assert kernels.BACKEND in ("compiled", "python")


@given(st.integers(0, 10_000), st.integers(2, 60), st.integers(1, 5))
def test_distance_kernels_bit_identical(seed, n, d):
    rng = np.random.default_rng(seed)
    X = np.round(rng.normal(size=(n, d)), 2)  # rounding forces distance ties
    P = np.ascontiguousarray(X[: max(1, n // 4)] + 0.5)
    assert np.array_equal(compiled.pairwise_sq_dists(X), _kernels_py.pairwise_sq_dists(X))
    assert np.array_equal(compiled.nearest_neighbor(X), _kernels_py.nearest_neighbor(X))
    ia, da = compiled.assign_nearest(X, P)
    ib, db = _kernels_py.assign_nearest(X, P)
    assert np.array_equal(ia, ib) and np.array_equal(da, db)


@given(st.integers(0, 10_000), st.floats(0.01, 0.5), st.floats(0.0, 1.0))
def test_competitive_epoch_equivalent(seed, alpha, rival_rate):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(80, 3))
    P = rng.normal(size=(5, 3)) * 2
    order = rng.permutation(80).astype(np.int64)
    Pa, Pb = P.copy(), P.copy()
    wa = compiled.competitive_epoch(Pa, X, order, alpha, rival_rate)
    wb = _kernels_py.competitive_epoch(Pb, X, order, alpha, rival_rate)
    assert np.array_equal(wa, wb)
    assert np.allclose(Pa, Pb, rtol=1e-12, atol=1e-12)
