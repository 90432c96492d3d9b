import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from clusterdrift.chunk import InvalidInputError, load_stream
from clusterdrift.streamgen import (
    CapacityError,
    ClusterSpec,
    DriftSpec,
    RealStreamSpec,
    StreamSpec,
    build_stream,
    cluster_counts,
    gen_base,
    gen_chunk,
    inject_drift,
    inject_real_drift,
    ingest_real,
    random_involution,
    two_gaussian_spec,
)


def class_counts(chunk, k):
    return np.bincount(chunk.labels, minlength=k)


# -- base chunk -------------------------------------------------------------

def test_two_gaussians_ir15_counts():
    base = gen_base(two_gaussian_spec(ir=15, n_clean=0, n_drift=0))
    assert base.n == 2000
    assert class_counts(base, 2).tolist() == [1875, 125]


def test_balanced_counts():
    base = gen_base(two_gaussian_spec(ir=1, n_clean=0, n_drift=0))
    assert class_counts(base, 2).tolist() == [1000, 1000]


def test_eight_gaussians_4000():
    centers = [(8.0 * np.cos(a), 8.0 * np.sin(a)) for a in np.linspace(0, 2 * np.pi, 8, endpoint=False)]
    spec = StreamSpec(tuple(ClusterSpec(mean=c) for c in centers), ir=10, minority=(6, 7),
                      n_base=4000, n_clean=0, n_drift=0)
    base = gen_base(spec)
    counts = class_counts(base, 8)
    assert base.n == 4000 and counts.sum() == 4000
    raw = 4000 * spec.weights() / spec.weights().sum()
    assert np.all(np.abs(counts - raw) < 1)
    assert counts[0] == 645 and counts[7] == 65  # 4000*10/62 and 4000/62, largest remainder


def test_base_too_small():
    with pytest.raises(InvalidInputError):
        gen_base(two_gaussian_spec(ir=40, n_base=30, n_clean=0, n_drift=0))


def test_spec_validation():
    with pytest.raises(InvalidInputError):
        two_gaussian_spec(ir=0.5)
    with pytest.raises(InvalidInputError):
        two_gaussian_spec(drift_kind="rotation")
    with pytest.raises(InvalidInputError):
        StreamSpec((ClusterSpec(mean=(0.0,), cov=((1.0,),)), ClusterSpec()))
    with pytest.raises(InvalidInputError):
        DriftSpec(0, 1.5)


@given(st.lists(st.floats(1.0, 50.0), min_size=1, max_size=8), st.integers(10, 5000))
def test_counts_within_one_of_proportional(weights, n):
    counts = cluster_counts(weights, n)
    raw = n * np.asarray(weights) / np.sum(weights)
    assert counts.sum() == n
    assert np.all(np.abs(counts - raw) < 1)


@given(st.sampled_from([1, 3, 5, 7, 10, 15, 18, 20, 30, 40]), st.integers(200, 4000))
def test_ir_fidelity(ir, n):
    small, large = cluster_counts([ir, 1], n)[::-1]
    # each count sits within one of its exact share, so the ratio is off by at most one count
    assert (large - 1) / (small + 1) <= ir <= (large + 1) / max(small - 1, 1)


# -- drift injection --------------------------------------------------------

def one_d_spec():
    return StreamSpec((ClusterSpec(mean=(0.0,), cov=((1.0,),)),), n_clean=0, n_drift=0)


def test_zero_margin_is_identity():
    spec = two_gaussian_spec()
    for kind in ("mean", "covariance", "both", "moon-noise"):
        assert inject_drift(spec, DriftSpec(1, 0.0, kind, (1.0, 0.0))) == spec.clusters


def test_mean_drift_unit_margin():
    c, = inject_drift(one_d_spec(), DriftSpec(0, 1.0, "mean", (1.0,)))
    assert c.mean == (1.0,)
    assert c.cov == ((1.0,),)


def test_mean_drift_scales_per_dimension_std():
    spec = two_gaussian_spec()  # minority std sqrt(0.5) on both axes
    c = inject_drift(spec, DriftSpec(1, 0.5, "mean", (0.6, 0.8)))[1]
    np.testing.assert_allclose(c.mean, np.array([5.0, 5.0]) + 0.5 * np.sqrt(0.5) * np.array([0.6, 0.8]))


def test_covariance_drift_quadruples_variance():
    c, = inject_drift(one_d_spec(), DriftSpec(0, 1.0, "covariance"))
    assert c.cov == ((4.0,),)
    assert c.mean == (0.0,)


def test_both_drift():
    c, = inject_drift(one_d_spec(), DriftSpec(0, 1.0, "both", (-1.0,)))
    assert c.mean == (-1.0,) and c.cov == ((4.0,),)


def test_drift_target_must_exist():
    with pytest.raises(InvalidInputError):
        inject_drift(two_gaussian_spec(), DriftSpec(5, 0.5))


def test_moon_noise_adds_ceil_u_n():
    moons = (ClusterSpec(kind="moons", center=(0.0, 0.0), radius=1.0, noise=0.05, upper=True),
             ClusterSpec(kind="moons", center=(1.0, -0.3), radius=1.0, noise=0.05, upper=False))
    spec = StreamSpec(moons, ir=4, n_chunk=500, n_clean=0, n_drift=0)
    c = inject_drift(spec, DriftSpec(1, 0.3, "moon-noise"))[1]
    assert c.extra_noise == math.ceil(0.3 * 100)
    X = c.sample(100, np.random.default_rng(0))
    assert len(X) == 130


def test_moons_lie_on_arc():
    c = ClusterSpec(kind="moons", center=(2.0, 1.0), radius=3.0, noise=0.0)
    X = c.sample(200, np.random.default_rng(1))
    np.testing.assert_allclose(np.hypot(X[:, 0] - 2.0, X[:, 1] - 1.0), 3.0)
    assert np.all(X[:, 1] >= 1.0 - 1e-12)


# -- streams ----------------------------------------------------------------

def small_spec(**kw):
    kw.setdefault("n_clean", 10)
    kw.setdefault("n_drift", 10)
    kw.setdefault("n_chunk", 200)
    kw.setdefault("n_base", 400)
    return two_gaussian_spec(**kw)


def test_stream_shape_and_schedule():
    stream = build_stream(small_spec(drift_kind="mean"))
    assert len(stream.chunks) == 21
    assert [c.chunk_index for c in stream.chunks] == list(range(21))
    assert sum(stream.labels) == 10
    assert stream.labels != sorted(stream.labels)  # shuffled, not blocked
    # labels match metadata presence
    assert sorted(stream.drift_meta) == [t for t, lab in enumerate(stream.labels, start=1) if lab]
    assert all(c.n == 200 for c in stream.chunks[1:])


def test_no_drift_chunks_means_all_clean():
    stream = build_stream(small_spec(n_drift=0))
    assert stream.labels == [False] * 10
    assert stream.drift_meta == {}


def test_seed_replay_is_identical():
    a, b = build_stream(small_spec()), build_stream(small_spec())
    assert a.digest() == b.digest()
    assert build_stream(small_spec(seed=1)).digest() != a.digest()


def test_chunks_generated_out_of_order_match():
    spec = small_spec()
    stream = build_stream(spec)
    for t in (17, 3, 11):
        chunk, meta = gen_chunk(spec, t, stream.chunks[t].drift_label)
        np.testing.assert_array_equal(chunk.X, stream.chunks[t].X)
        assert meta == stream.drift_meta.get(t, {})


def test_fresh_margin_per_drifted_chunk():
    stream = build_stream(small_spec())
    us = [m["u"] for m in stream.drift_meta.values()]
    assert len(set(us)) == len(us)
    assert all(0.1 <= u <= 1.0 for u in us)


def test_clean_chunks_match_base_means():
    spec = small_spec(n_clean=100, n_drift=0, n_chunk=500, n_base=2000)
    stream = build_stream(spec)
    base = stream.chunks[0].X
    mu, sd = base.mean(axis=0), base.std(axis=0)
    ok = [np.all(np.abs(c.X.mean(axis=0) - mu) < 3 * sd / np.sqrt(c.n)) for c in stream.chunks[1:]]
    assert np.mean(ok) >= 0.95


def test_shift_metadata_matches_realized_shift():
    spec = small_spec(drift_kind="mean", n_chunk=2000, ir=1, n_clean=0, n_drift=5)
    stream = build_stream(spec)
    for t, meta in stream.drift_meta.items():
        chunk = stream.chunks[t]
        realized = chunk.X[chunk.labels == meta["target"]].mean(axis=0) - np.array([5.0, 5.0])
        np.testing.assert_allclose(realized, meta["shift"], atol=0.1)
        assert np.isclose(np.linalg.norm(meta["shift"]), meta["u"] * np.sqrt(0.5))


def test_write_and_reload(tmp_path):
    stream = build_stream(small_spec(n_clean=2, n_drift=2))
    manifest = stream.write(tmp_path)
    chunks = load_stream(manifest)
    assert [c.drift_label for c in chunks] == [False] + stream.labels
    for a, b in zip(chunks, stream.chunks):
        np.testing.assert_array_equal(a.X, b.X)
        np.testing.assert_array_equal(a.labels, b.labels)


def test_spec_dict_round_trip():
    spec = small_spec(drift_kind="both")
    assert StreamSpec.from_dict(spec.to_dict()) == spec


# -- real tables ------------------------------------------------------------

def table(rng, sizes=(600, 300, 100), d=4):
    X = np.vstack([rng.normal(3.0 * i, 1.0, size=(n, d)) for i, n in enumerate(sizes)])
    y = np.concatenate([np.full(n, f"c{i}") for i, n in enumerate(sizes)])
    return X, y


def real_spec(**kw):
    defaults = dict(ir=3, n_base=200, n_chunk=100, n_clean=4, n_drift=4, seed=3)
    defaults.update(kw)
    return RealStreamSpec(**defaults)


def test_involution_squares_to_identity():
    rng = np.random.default_rng(0)
    for d in range(1, 12):
        p = random_involution(d, rng)
        assert sorted(p) == list(range(d))
        np.testing.assert_array_equal(p[p], np.arange(d))


def test_recorded_permutation_restores_rows(rng):
    X, y = table(rng)
    stream = inject_real_drift(X, y, real_spec(drift_modes=("permute",)))
    pool = {tuple(r) for r in X}
    assert stream.drift_meta
    for t, rec in stream.drift_meta.items():
        rows, perm = rec["rows"], np.asarray(rec["permutation"])
        Xc = stream.chunks[t].X
        restored = Xc[rows][:, perm]
        assert all(tuple(r) in pool for r in restored)
        np.testing.assert_array_equal(restored[:, perm], Xc[rows])


def test_zero_fraction_equals_clean_sampling(rng):
    X, y = table(rng)
    drifted = inject_real_drift(X, y, real_spec(u_range=(0.0, 0.0)))
    clean = inject_real_drift(X, y, real_spec(n_clean=8, n_drift=0))
    for a, b in zip(drifted.chunks, clean.chunks):
        np.testing.assert_array_equal(a.X, b.X)


def test_real_counts_and_substitution(rng):
    X, y = table(rng)
    stream = inject_real_drift(X, y, real_spec(drift_modes=("substitute",)))
    # k'=2 most frequent classes, minority weight 1, majority ir
    assert class_counts(stream.chunks[0], 2).tolist() == [150, 50]
    held_out = {tuple(r) for r in X[y == "c2"]}
    for t, rec in stream.drift_meta.items():
        sub = stream.chunks[t].X[rec["rows"]]
        assert all(tuple(r) in held_out for r in sub)
        assert len(rec["rows"]) == round(rec["u"] * 100)


def test_capacity_error_lists_shortfall(rng):
    X, y = table(rng, sizes=(600, 30, 100))
    with pytest.raises(CapacityError, match="need"):
        inject_real_drift(X, y, real_spec(classes=("c0", "c1")))


def test_substitute_needs_held_out_class(rng):
    X, y = table(rng, sizes=(600, 300))
    with pytest.raises(CapacityError):
        inject_real_drift(X, y, real_spec())


def test_ingest_csv(tmp_path, rng):
    X, y = table(rng)
    path = tmp_path / "t.csv"
    lines = ["a,b,class,c,d"] + [",".join(map(repr, map(float, r[:2]))) + f",{lab}," + ",".join(map(repr, map(float, r[2:])))
             for r, lab in zip(X, y)]
    path.write_text("\n".join(lines) + "\n")
    stream = ingest_real(path, "class", real_spec())
    ref = inject_real_drift(X, y, real_spec())
    assert stream.digest() == ref.digest()
    with pytest.raises(InvalidInputError):
        ingest_real(path, "label", real_spec())
