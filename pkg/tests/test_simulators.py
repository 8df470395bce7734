"""Simulators: closed-form moment oracles, exact enumeration, determinism."""

import math

import numpy as np
import pytest
from scipy.stats import chisquare

from bootsl.errors import InvalidPrecision, InvalidSpin
from bootsl.simulators import (
    gillespie_lv,
    ising_gibbs,
    ising_unnorm_logdensity,
    simulate_gaussian_iid,
)
from bootsl.stats import summarize_ising


# ---------------------------------------------------------------- gaussian


def test_gaussian_iid_moments():
    rng = np.random.default_rng(1)
    y = simulate_gaussian_iid(200_000, precision=16.0, rng=rng)
    assert y.mean() == pytest.approx(0.0, abs=3 * 0.25 / math.sqrt(200_000))
    assert y.std(ddof=1) == pytest.approx(0.25, rel=0.01)


def test_gaussian_iid_validation_and_determinism():
    with pytest.raises(InvalidPrecision):
        simulate_gaussian_iid(10, 0.0, np.random.default_rng(0))
    with pytest.raises(InvalidPrecision):
        simulate_gaussian_iid(10, -1.0, np.random.default_rng(0))
    a = simulate_gaussian_iid(50, 2.0, np.random.default_rng(9))
    b = simulate_gaussian_iid(50, 2.0, np.random.default_rng(9))
    np.testing.assert_array_equal(a, b)


# ---------------------------------------------------------------- predator-prey


def test_lv_pure_birth_mean():
    # Oracle: with predation and death switched off the prey count is a pure
    # birth process with E[Y_t] = y0 * exp(theta1 * t).
    t_end, th1, y0, reps = 5.0, 0.1, 100, 300
    want = y0 * math.exp(th1 * t_end)
    sd = math.sqrt(y0 * math.exp(th1 * t_end) * (math.exp(th1 * t_end) - 1.0))
    tot = 0.0
    for s in range(reps):
        path = gillespie_lv([th1, 0.0, 0.0], seed=1000 + s, n_obs=5, dt=1.0, x0=0, y0=y0)
        assert not path.diverged
        tot += path.y[-1]
    assert tot / reps == pytest.approx(want, abs=3 * sd / math.sqrt(reps))


def test_lv_pure_death_mean():
    # Oracle: death-only predators decay with E[X_t] = x0 * exp(-theta3 * t).
    t_end, th3, x0, reps = 5.0, 0.2, 100, 300
    want = x0 * math.exp(-th3 * t_end)
    sd = math.sqrt(x0 * math.exp(-th3 * t_end) * (1.0 - math.exp(-th3 * t_end)))
    tot = 0.0
    for s in range(reps):
        path = gillespie_lv([0.0, 0.0, th3], seed=2000 + s, n_obs=5, dt=1.0, x0=x0, y0=0)
        assert not path.diverged
        tot += path.x[-1]
    assert tot / reps == pytest.approx(want, abs=3 * sd / math.sqrt(reps))


def test_lv_counts_are_nonnegative_integers():
    path = gillespie_lv([1.0, 0.005, 0.6], seed=5, n_obs=32, dt=2.0)
    for arr in (path.x, path.y):
        assert np.all(arr >= 0)
        assert np.all(arr == np.round(arr))
    assert path.times[0] == 2.0 and path.times[-1] == 64.0


def test_lv_extinction_freezes_state():
    # A lone predator population dies out; once empty, nothing moves.
    path = gillespie_lv([0.0, 0.0, 5.0], seed=3, n_obs=6, dt=2.0, x0=3, y0=0)
    assert not path.diverged
    assert path.x[-1] == 0.0 and path.y[-1] == 0.0


def test_lv_population_cap_sets_diverged():
    path = gillespie_lv(
        [2.0, 0.0, 0.0], seed=4, n_obs=4, dt=2.0, x0=0, y0=1000, max_pop=1e6
    )
    assert path.diverged
    assert path.y[-1] == path.y[-2]


def test_lv_event_cap_sets_diverged():
    path = gillespie_lv([1.0, 0.0, 0.0], seed=6, n_obs=4, dt=2.0, x0=0, y0=500,
                        max_events=100)
    assert path.diverged


def test_lv_determinism_and_validation():
    a = gillespie_lv([1.0, 0.005, 0.6], seed=77, n_obs=8)
    b = gillespie_lv([1.0, 0.005, 0.6], seed=77, n_obs=8)
    np.testing.assert_array_equal(a.x, b.x)
    np.testing.assert_array_equal(a.y, b.y)
    c = gillespie_lv([1.0, 0.005, 0.6], seed=78, n_obs=8)
    assert not (np.array_equal(a.x, c.x) and np.array_equal(a.y, c.y))
    with pytest.raises(ValueError):
        gillespie_lv([1.0, -0.1, 0.6], seed=0)
    with pytest.raises(ValueError):
        gillespie_lv([1.0, 0.1], seed=0)


# ---------------------------------------------------------------- spin lattice


def _exact_pair_sum_pmf(theta):
    # Oracle: enumerate all 2^9 configurations of the 3x3 torus.
    pmf = {}
    for bits in range(512):
        g = np.array([1 if (bits >> k) & 1 else -1 for k in range(9)]).reshape(3, 3)
        s = summarize_ising(g)
        pmf[s] = pmf.get(s, 0.0) + math.exp(theta * s)
    z = sum(pmf.values())
    return {s: w / z for s, w in pmf.items()}


def test_gibbs_matches_exact_enumeration():
    theta = 0.2
    pmf = _exact_pair_sum_pmf(theta)
    rng = np.random.default_rng(314)
    grid = ising_gibbs(3, theta, rng, sweeps=100)
    draws = 20_000
    observed = {}
    for _ in range(draws):
        grid = ising_gibbs(3, theta, rng, sweeps=4, init=grid)
        s = summarize_ising(grid)
        observed[s] = observed.get(s, 0) + 1
    # Merge every support point with small expectation into one bin so the
    # chi-square approximation holds.
    support = sorted(pmf)
    main = [s for s in support if pmf[s] * draws >= 10]
    rest = [s for s in support if pmf[s] * draws < 10]
    obs = [observed.get(s, 0) for s in main]
    exp = [pmf[s] * draws for s in main]
    if rest:
        obs.append(sum(observed.get(s, 0) for s in rest))
        exp.append(sum(pmf[s] for s in rest) * draws)
    assert chisquare(obs, exp).pvalue > 0.001


def test_gibbs_independent_sites_at_zero_coupling():
    # At theta = 0 each site is an independent fair coin, so the pair sum
    # has mean 0 and variance 2 * side^2 (edge products are uncorrelated).
    rng = np.random.default_rng(55)
    reps, side = 500, 4
    vals = np.empty(reps)
    for k in range(reps):
        vals[k] = summarize_ising(ising_gibbs(side, 0.0, rng, sweeps=2))
    n_edges = 2 * side * side
    assert vals.mean() == pytest.approx(0.0, abs=3 * math.sqrt(n_edges / reps))


def test_gibbs_positive_coupling_orders_the_grid():
    rng = np.random.default_rng(66)
    strong = summarize_ising(ising_gibbs(12, 1.0, rng, sweeps=60))
    assert strong > 0.8 * 2 * 12 * 12


def test_gibbs_determinism_and_init_handling():
    a = ising_gibbs(5, 0.3, np.random.default_rng(12), sweeps=7)
    b = ising_gibbs(5, 0.3, np.random.default_rng(12), sweeps=7)
    np.testing.assert_array_equal(a, b)

    init = np.ones((5, 5), dtype=int)
    out = ising_gibbs(5, 0.3, np.random.default_rng(1), sweeps=0, init=init)
    np.testing.assert_array_equal(out, init)
    out2 = ising_gibbs(5, 0.3, np.random.default_rng(1), sweeps=3, init=init)
    np.testing.assert_array_equal(init, np.ones((5, 5)))  # caller's array untouched
    assert np.all(np.abs(out2) == 1)

    with pytest.raises(InvalidSpin):
        ising_gibbs(3, 0.3, np.random.default_rng(0), init=np.zeros((3, 3)))
    with pytest.raises(ValueError):
        ising_gibbs(4, 0.3, np.random.default_rng(0), init=np.ones((3, 3)))


def test_unnorm_logdensity_is_theta_times_pair_sum():
    g = np.ones((3, 3))
    assert ising_unnorm_logdensity(g, 0.3) == pytest.approx(0.3 * 18.0, rel=1e-14)
    assert ising_unnorm_logdensity(g, -1.2) == pytest.approx(-1.2 * 18.0, rel=1e-14)
