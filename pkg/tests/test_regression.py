"""Neighbour store and local linear prediction: brute-force oracle, affine
identities, variance reduction."""

import numpy as np
import pytest

from bootsl.errors import InsufficientHistory
from bootsl.regression import MuStore, local_linear_predict


def _brute_knn(thetas, query, l):
    # Independent reference: standardize by the population sd, full scan,
    # sort by (distance, insertion order).
    arr = np.asarray(thetas)
    scale = arr.std(axis=0)
    scale = np.where(scale == 0.0, 1.0, scale)
    d = np.sqrt((((arr - query) / scale) ** 2).sum(axis=1))
    return np.lexsort((np.arange(len(arr)), d))[:l]


def test_insert_then_query_returns_the_point():
    store = MuStore(2, 3)
    store.insert([1.0, 2.0], [5.0, 6.0, 7.0])
    got = store.knn([1.1, 2.1], 1)
    np.testing.assert_array_equal(got.thetas, [[1.0, 2.0]])
    np.testing.assert_array_equal(got.mus, [[5.0, 6.0, 7.0]])
    assert len(store) == 1


def test_duplicates_allowed_and_size_grows():
    store = MuStore(1, 1)
    for k in range(5):
        store.insert([3.0], [float(k)])
        assert len(store) == k + 1
    got = store.knn([3.0], 5)
    # All five coincide; insertion order decides.
    np.testing.assert_array_equal(got.indices, np.arange(5))


def test_query_all_points_and_history_guard():
    store = MuStore(1, 1)
    for k in range(4):
        store.insert([float(k)], [0.0])
    assert store.knn([10.0], 4).thetas.shape == (4, 1)
    with pytest.raises(InsufficientHistory):
        store.knn([0.0], 5)


def test_query_at_stored_point_includes_itself():
    store = MuStore(2, 1)
    rng = np.random.default_rng(3)
    pts = rng.normal(size=(50, 2))
    for p in pts:
        store.insert(p, [0.0])
    got = store.knn(pts[17], 5)
    assert 17 in got.indices
    assert got.indices[0] == 17  # zero distance sorts first


def test_knn_matches_brute_force_scan():
    rng = np.random.default_rng(41)
    store = MuStore(3, 2)
    # Anisotropic coordinates so standardization matters; half the points on
    # an integer grid to generate exact distance ties.
    thetas = np.vstack(
        [
            rng.normal(size=(500, 3)) * np.array([100.0, 1.0, 0.01]),
            rng.integers(-2, 3, size=(500, 3)) * np.array([100.0, 1.0, 0.01]),
        ]
    )
    for p in thetas:
        store.insert(p, rng.normal(size=2))
    for _ in range(100):
        q = rng.normal(size=3) * np.array([100.0, 1.0, 0.01])
        l = int(rng.integers(1, 40))
        got = store.knn(q, l)
        np.testing.assert_array_equal(got.indices, _brute_knn(thetas, q, l))


def test_knn_sees_points_inserted_after_a_query():
    store = MuStore(1, 1)
    store.insert([0.0], [0.0])
    store.insert([5.0], [1.0])
    assert store.knn([4.0], 1).indices[0] == 1
    store.insert([4.1], [2.0])
    assert store.knn([4.0], 1).indices[0] == 2


def test_local_linear_recovers_affine_data():
    rng = np.random.default_rng(7)
    thetas = rng.normal(size=(30, 2))
    a = np.array([[1.5, -2.0], [0.3, 0.4]])
    b = np.array([10.0, -5.0])
    mus = thetas @ a + b
    q = np.array([0.3, -0.8])
    pred = local_linear_predict(thetas, mus, q)
    assert not pred.fallback_mean
    np.testing.assert_allclose(pred.mu, q @ a + b, rtol=1e-10)


def test_local_linear_fallback_on_shared_theta():
    thetas = np.tile([2.0, 3.0], (8, 1))
    mus = np.arange(8.0)[:, None]
    pred = local_linear_predict(thetas, mus, [0.0, 0.0])
    assert pred.fallback_mean
    np.testing.assert_allclose(pred.mu, [3.5])


def test_local_linear_fallback_on_too_few_points():
    pred = local_linear_predict([[1.0, 2.0]], [[5.0]], [0.0, 0.0])
    assert pred.fallback_mean


def test_local_linear_affine_equivariance():
    rng = np.random.default_rng(8)
    thetas = rng.normal(size=(40, 2))
    mus = rng.normal(size=(40, 3))
    q = rng.normal(size=2)
    base = local_linear_predict(thetas, mus, q)
    scaled = local_linear_predict(thetas, 2.5 * mus - 4.0, q)
    np.testing.assert_allclose(scaled.mu, 2.5 * base.mu - 4.0, rtol=1e-9, atol=1e-9)


def test_local_linear_permutation_invariance():
    rng = np.random.default_rng(9)
    thetas = rng.normal(size=(25, 2))
    mus = rng.normal(size=(25, 2))
    q = np.zeros(2)
    base = local_linear_predict(thetas, mus, q)
    perm = rng.permutation(25)
    shuf = local_linear_predict(thetas[perm], mus[perm], q)
    np.testing.assert_allclose(shuf.mu, base.mu, rtol=1e-9, atol=1e-12)


def test_local_linear_beats_single_raw_estimate():
    # Regressing 100 noisy estimates reduces the prediction variance far
    # below the single-estimate noise.
    rng = np.random.default_rng(10)
    slope, icept, noise = 3.0, 1.0, 0.5
    reps = 300
    preds = np.empty(reps)
    for k in range(reps):
        thetas = rng.uniform(-1, 1, size=(100, 1))
        mus = icept + slope * thetas + rng.normal(0, noise, size=(100, 1))
        preds[k] = local_linear_predict(thetas, mus, [0.0]).mu[0]
    assert preds.var(ddof=1) < 0.2 * noise**2
    assert preds.mean() == pytest.approx(icept, abs=0.05)


def test_store_dump_round_trips(tmp_path):
    store = MuStore(2, 1)
    rng = np.random.default_rng(11)
    pts = rng.normal(size=(6, 2))
    mus = rng.normal(size=(6, 1))
    for p, m in zip(pts, mus):
        store.insert(p, m)
    path = tmp_path / "store.csv"
    store.dump(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "theta_0,theta_1,mu_0"
    back = np.loadtxt(path, delimiter=",", skiprows=1)
    np.testing.assert_array_equal(back, np.hstack([pts, mus]))


def test_insert_validation():
    store = MuStore(2, 1)
    with pytest.raises(ValueError):
        store.insert([1.0], [0.0])
    with pytest.raises(ValueError):
        store.insert([1.0, 2.0], [0.0, 1.0])
    with pytest.raises(ValueError):
        store.knn([0.0, 0.0], 0)
