"""Diagnostics: independence and AR(1) oracles, exact error identities,
density sanity."""

import math

import numpy as np
import pytest
from scipy.signal import lfilter

from bootsl.diagnostics import ess_weights, iat, kde, replicate_metrics
from bootsl.errors import DegenerateBandwidth, InsufficientSamples


# ---------------------------------------------------------------- iat


def test_iat_iid_sequence_is_one():
    rng = np.random.default_rng(100)
    chain = rng.normal(size=100_000)
    assert abs(iat(chain) - 1.0) < 0.1


def test_iat_ar1_matches_analytic_value():
    # Oracle: AR(1) with coefficient rho has IAT (1+rho)/(1-rho) = 3.
    rng = np.random.default_rng(101)
    e = rng.normal(size=1_000_000)
    chain = lfilter([1.0], [1.0, -0.5], e)
    assert iat(chain) == pytest.approx(3.0, rel=0.10)


def test_iat_constant_chain_marker_and_length_guard():
    assert iat(np.full(500, 3.3)) == math.inf
    with pytest.raises(InsufficientSamples):
        iat(np.arange(99.0))


def test_iat_never_below_one():
    rng = np.random.default_rng(102)
    for _ in range(20):
        n = int(rng.integers(100, 2000))
        chain = rng.normal(size=n)
        if rng.random() < 0.5:
            # Antithetic flavour: alternating sign component.
            chain += 2.0 * (-1.0) ** np.arange(n)
        assert iat(chain) >= 1.0 - 1e-9


# ---------------------------------------------------------------- ess


def test_ess_trivial_cases():
    assert ess_weights(np.full(50, 1 / 50)) == pytest.approx(50.0, rel=1e-12)
    w = np.zeros(10)
    w[3] = 1.0
    assert ess_weights(w) == pytest.approx(1.0, rel=1e-12)
    w = np.zeros(10)
    w[2] = w[7] = 0.5
    assert ess_weights(w) == pytest.approx(2.0, rel=1e-12)


def test_ess_range_and_permutation_invariance():
    rng = np.random.default_rng(103)
    for _ in range(20):
        w = rng.random(30)
        w /= w.sum()
        e = ess_weights(w)
        assert 1.0 <= e <= 30.0 + 1e-9
        assert ess_weights(w[rng.permutation(30)]) == pytest.approx(e, rel=1e-12)
    with pytest.raises(ValueError):
        ess_weights(np.array([0.5, -0.1, 0.6]))


# ---------------------------------------------------------------- replicates


def test_replicate_metrics_exact_cases():
    r = replicate_metrics([5.0, 5.0, 5.0], 5.0)
    assert (r.bias, r.sd, r.rmse) == (0.0, 0.0, 0.0)
    r = replicate_metrics([4.0, 6.0], 5.0)
    assert r.bias == 0.0 and r.sd == 1.0 and r.rmse == 1.0
    assert r.n_replicates == 2


def test_replicate_metrics_identity_and_oracle():
    rng = np.random.default_rng(104)
    est = rng.normal(2.0, 0.3, size=400)
    r = replicate_metrics(est, 1.9)
    # Direct-formula oracle with plain loops.
    mean = sum(est) / len(est)
    want_bias = mean - 1.9
    want_sd = math.sqrt(sum((e - mean) ** 2 for e in est) / len(est))
    assert r.bias == pytest.approx(want_bias, rel=1e-10)
    assert r.sd == pytest.approx(want_sd, rel=1e-10)
    assert r.rmse**2 == pytest.approx(r.bias**2 + r.sd**2, rel=1e-12)
    with pytest.raises(InsufficientSamples):
        replicate_metrics([1.0], 0.0)


# ---------------------------------------------------------------- kde


def test_kde_two_points_symmetric():
    grid = np.linspace(-4, 4, 401)
    dens = kde(np.array([-1.0, 1.0]), grid)
    np.testing.assert_allclose(dens, dens[::-1], rtol=1e-9)
    assert np.all(dens >= 0.0)


def test_kde_integrates_to_one():
    rng = np.random.default_rng(105)
    samples = rng.normal(size=5000)
    grid = np.linspace(-6, 6, 1201)
    dens = kde(samples, grid)
    assert np.trapezoid(dens, grid) == pytest.approx(1.0, abs=0.01)


def test_kde_standard_normal_peak():
    rng = np.random.default_rng(106)
    samples = rng.normal(size=20_000)
    grid = np.linspace(-1, 1, 501)
    dens = kde(samples, grid)
    assert dens.max() == pytest.approx(1.0 / math.sqrt(2 * math.pi), rel=0.10)


def test_kde_weighted_matches_uniform_and_shift():
    rng = np.random.default_rng(107)
    samples = rng.normal(size=300)
    grid = np.linspace(-3, 3, 101)
    base = kde(samples, grid)
    np.testing.assert_allclose(
        kde(samples, grid, np.full(300, 1 / 300)), base, rtol=1e-9
    )
    perm = rng.permutation(300)
    np.testing.assert_allclose(kde(samples[perm], grid), base, rtol=1e-9)
    shifted = kde(samples + 7.0, grid + 7.0)
    np.testing.assert_allclose(shifted, base, rtol=1e-7)


def test_kde_degenerate_inputs():
    grid = np.linspace(-1, 1, 11)
    with pytest.raises(InsufficientSamples):
        kde(np.array([1.0]), grid)
    with pytest.raises(InsufficientSamples):
        kde(np.full(10, 2.0), grid)
    with pytest.raises(ValueError):
        kde(np.array([0.0, 1.0]), grid, np.array([0.5, -0.5]))
