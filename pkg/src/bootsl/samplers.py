"""Samplers: noisy random-walk Metropolis, the auxiliary-variable exchange
chain for the spin lattice, and a sequential annealed sampler whose mean
statistic comes from local regression over particle history.

The Metropolis chain stores the likelihood estimate at the current state and
never refreshes it, so a lucky overestimate must be overcome by proposals
(the standard pseudo-marginal convention).  The sequential sampler tempers
the estimated likelihood with exponents ``nu_t``, moves particles with a
Gaussian kernel scaled to the cloud, and weights by target density over
mixture proposal density, so the kernel must be evaluable pointwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .diagnostics import ess_weights
from .errors import (
    DegenerateSeries,
    DegenerateWeights,
    NonInvertibleCovariance,
    NormalizationError,
)
from .estimators import _sigma_from_datasets, estimate_mu_raw
from .regression import local_linear_predict
from .stats import SyntheticGaussian, gaussian_log_density, summarize_ising
from .simulators import ising_gibbs

__all__ = [
    "ChainResult",
    "ExchangeResult",
    "ParticleCloud",
    "AnnealSchedule",
    "mh_chain",
    "exchange_chain",
    "systematic_resample",
    "make_schedule",
    "tempered_mixture_logweights",
    "smc_blbsl",
]


@dataclass(frozen=True)
class ChainResult:
    """Random-walk chain output: states, stored log-likelihood estimates,
    acceptance count, and how many proposals hit a degenerate covariance."""

    thetas: np.ndarray
    logliks: np.ndarray
    n_accept: int
    n_degenerate: int

    @property
    def acceptance_rate(self) -> float:
        return self.n_accept / max(self.thetas.shape[0] - 1, 1)


@dataclass(frozen=True)
class ExchangeResult:
    thetas: np.ndarray
    n_accept: int


def _safe_loglik(loglik, theta, counter):
    # A covariance too ill-conditioned to invert is a rejection, not a crash;
    # anything else propagates as a genuine failure.
    try:
        return float(loglik(theta))
    except NonInvertibleCovariance:
        counter[0] += 1
        return -np.inf


def mh_chain(theta0, proposal_sd, n_iter: int, loglik, log_prior, rng) -> ChainResult:
    """Symmetric Gaussian random-walk Metropolis with an estimated
    log-likelihood.

    The chain has ``n_iter`` states including the start.  Proposals outside
    the prior support are rejected without calling the estimator.
    """
    theta0 = np.atleast_1d(np.asarray(theta0, dtype=float))
    sd = np.broadcast_to(np.asarray(proposal_sd, dtype=float), theta0.shape)
    if n_iter < 1:
        raise ValueError("chain needs at least one state")
    lp = float(log_prior(theta0))
    if lp == -np.inf:
        raise ValueError("start point has zero prior density")
    degenerate = [0]
    ll = _safe_loglik(loglik, theta0, degenerate)
    thetas = np.empty((n_iter, theta0.size))
    logliks = np.empty(n_iter)
    thetas[0] = theta0
    logliks[0] = ll
    cur = theta0
    n_accept = 0
    for i in range(1, n_iter):
        cand = cur + rng.normal(size=cur.size) * sd
        lpc = float(log_prior(cand))
        if lpc > -np.inf:
            llc = _safe_loglik(loglik, cand, degenerate)
            num = llc + lpc
            den = ll + lp
            accept = num > -np.inf and (
                den == -np.inf or math.log(rng.random()) < num - den
            )
            if accept:
                cur, ll, lp = cand, llc, lpc
                n_accept += 1
        thetas[i] = cur
        logliks[i] = ll
    return ChainResult(thetas, logliks, n_accept, degenerate[0])


def exchange_chain(
    theta0: float,
    proposal_sd: float,
    n_iter: int,
    grid_obs: np.ndarray,
    rng,
    sweeps: int = 10,
    log_prior=None,
) -> ExchangeResult:
    """Auxiliary-variable chain for the lattice coupling.

    Each iteration proposes theta', simulates a fresh grid x' at theta', and
    accepts with probability min(1, exp[(theta'-theta)(S(y)-S(x'))] times
    the prior ratio), which cancels the intractable normalising constants.
    The default prior is uniform on [0, 1].
    """
    if log_prior is None:
        log_prior = lambda t: 0.0 if 0.0 <= t <= 1.0 else -np.inf
    if n_iter < 1:
        raise ValueError("chain needs at least one state")
    s_obs = summarize_ising(grid_obs)
    side = np.asarray(grid_obs).shape[0]
    cur = float(theta0)
    lp = float(log_prior(cur))
    if lp == -np.inf:
        raise ValueError("start point has zero prior density")
    thetas = np.empty(n_iter)
    thetas[0] = cur
    n_accept = 0
    for i in range(1, n_iter):
        cand = cur + float(rng.normal()) * proposal_sd
        lpc = float(log_prior(cand))
        if lpc > -np.inf:
            aux = ising_gibbs(side, cand, rng, sweeps=sweeps)
            log_alpha = (cand - cur) * (s_obs - summarize_ising(aux)) + lpc - lp
            if log_alpha >= 0.0 or math.log(rng.random()) < log_alpha:
                cur, lp = cand, lpc
                n_accept += 1
        thetas[i] = cur
    return ExchangeResult(thetas, n_accept)


def systematic_resample(weights: np.ndarray, rng) -> np.ndarray:
    """Offspring indices with a single stratifying uniform: expectation of
    each count is P times its weight."""
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0.0) or abs(w.sum() - 1.0) > 1e-9:
        raise NormalizationError(f"weights sum to {w.sum()!r}")
    p = w.size
    positions = (rng.random() + np.arange(p)) / p
    return np.searchsorted(np.cumsum(w), positions, side="left").astype(np.int64)


@dataclass(frozen=True)
class AnnealSchedule:
    """Tempering exponents nu_0..nu_T, each in [0, 1], nondecreasing."""

    nus: np.ndarray

    def __post_init__(self):
        nus = np.asarray(self.nus, dtype=float)
        if nus.ndim != 1 or nus.size < 2:
            raise ValueError("schedule needs at least two exponents")
        if np.any(nus < 0.0) or np.any(nus > 1.0) or np.any(np.diff(nus) < 0.0):
            raise ValueError("exponents must be nondecreasing within [0, 1]")
        object.__setattr__(self, "nus", nus)

    @property
    def n_targets(self) -> int:
        return self.nus.size - 1


def make_schedule(t_targets: int) -> AnnealSchedule:
    """Quadratic schedule nu_t = (t/T)^2 for t = 0..T."""
    if t_targets < 1:
        raise ValueError("need at least one target")
    t = np.arange(t_targets + 1, dtype=float)
    return AnnealSchedule((t / t_targets) ** 2)


def _chol_with_ridge(cov: np.ndarray) -> np.ndarray:
    ridge = 1e-12 * max(float(np.trace(cov)) / cov.shape[0], 1e-12)
    for _ in range(60):
        try:
            return np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            cov = cov + ridge * np.eye(cov.shape[0])
            ridge *= 10.0
    raise NonInvertibleCovariance("move kernel covariance cannot be repaired")


def _kernel_logpdf(diffs: np.ndarray, chol: np.ndarray) -> np.ndarray:
    # Zero-mean Gaussian log density of each row given the Cholesky factor.
    z = solve_triangular(chol, diffs.T, lower=True)
    d = diffs.shape[1]
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
    return -0.5 * (d * math.log(2.0 * math.pi) + logdet + np.sum(z * z, axis=0))


def tempered_mixture_logweights(
    new_thetas: np.ndarray,
    log_prior_vals: np.ndarray,
    logliks: np.ndarray,
    nu: float,
    prev_thetas: np.ndarray,
    prev_weights: np.ndarray,
    kernel_cov: np.ndarray,
) -> np.ndarray:
    """Unnormalised log weights: tempered target over mixture proposal.

    log w = log prior + nu * loglik - log sum_q w_q K(theta | theta_q).
    Scaling all previous weights by a positive constant shifts every log
    weight equally, so normalised weights are unchanged.
    """
    new_thetas = np.atleast_2d(new_thetas)
    prev_thetas = np.atleast_2d(prev_thetas)
    chol = _chol_with_ridge(np.atleast_2d(kernel_cov))
    logw_prev = np.where(prev_weights > 0.0, np.log(np.maximum(prev_weights, 1e-300)), -np.inf)
    out = np.empty(new_thetas.shape[0])
    for p in range(new_thetas.shape[0]):
        kern = _kernel_logpdf(new_thetas[p] - prev_thetas, chol)
        mix = _logsumexp(kern + logw_prev)
        tempered = 0.0 if nu == 0.0 else nu * logliks[p]
        out[p] = log_prior_vals[p] + tempered - mix
    return out


def _logsumexp(arr: np.ndarray) -> float:
    hi = np.max(arr)
    if hi == -np.inf:
        return -np.inf
    return float(hi + np.log(np.sum(np.exp(arr - hi))))


@dataclass(frozen=True)
class ParticleCloud:
    """Weighted particles after one annealing target."""

    particles: np.ndarray
    weights: np.ndarray
    logliks: np.ndarray
    generation: int

    def __post_init__(self):
        if abs(float(self.weights.sum()) - 1.0) > 1e-9:
            raise NormalizationError("cloud weights must be normalized")

    @property
    def ess(self) -> float:
        return ess_weights(self.weights)


def _weighted_cov(thetas: np.ndarray, weights: np.ndarray) -> np.ndarray:
    mean = weights @ thetas
    dev = thetas - mean
    return (dev.T * weights) @ dev


def smc_blbsl(
    p_particles: int,
    schedule: AnnealSchedule,
    prior_sample,
    prior_logpdf,
    model,
    cfg,
    plan,
    s_obs,
    l_neighbors: int,
    rng,
    mu_scale: float = 1.0,
    store=None,
) -> list:
    """Annealed sequential sampler with regression-predicted means.

    Starts from prior draws, each with one batch of size-n simulations whose
    raw mean estimate seeds the history store.  Per target: move every
    particle with a Gaussian kernel (covariance 2.38^2/d times the weighted
    cloud covariance), simulate at the moved point, insert its raw mean
    estimate, then, with all inserts done, predict the mean at each
    particle from its ``l_neighbors`` nearest stored points (or the particle's
    own raw estimate, per ``cfg.mu_mode``), estimate the covariance from the
    particle's own resamples, weight by tempered target over mixture
    proposal, normalise, and systematically resample.

    Returns the weighted cloud of every generation, 0..T.
    """
    from .regression import MuStore

    if p_particles < 2:
        raise ValueError("need at least two particles")
    if cfg.mu_mode == "oracle":
        raise ValueError("oracle mean mode is not available here")
    s_obs = np.atleast_1d(np.asarray(s_obs, dtype=float))

    def particle_parts(theta):
        # One simulation batch serves both the raw mean and the covariance.
        try:
            datasets = model.simulate_m(theta, cfg.m, rng)
            stats = np.stack([model.summarize(d) for d in datasets])
            raw_mu = estimate_mu_raw(stats, "extensive", mu_scale)
            sigma = _sigma_from_datasets(model, datasets, plan)
            return raw_mu, sigma
        except DegenerateSeries:
            return None, None

    thetas = np.stack([np.atleast_1d(np.asarray(prior_sample(rng), dtype=float))
                       for _ in range(p_particles)])
    d_theta = thetas.shape[1]
    if store is None:
        store = MuStore(d_theta, s_obs.size)
    raw_mus = [None] * p_particles
    sigmas = [None] * p_particles
    for p in range(p_particles):
        raw_mus[p], sigmas[p] = particle_parts(thetas[p])
        if raw_mus[p] is not None:
            store.insert(thetas[p], raw_mus[p])
    weights = np.full(p_particles, 1.0 / p_particles)
    clouds = [ParticleCloud(thetas.copy(), weights.copy(), np.full(p_particles, np.nan), 0)]

    for t in range(schedule.n_targets):
        nu = float(schedule.nus[t + 1])
        kernel_cov = (2.38**2 / d_theta) * _weighted_cov(thetas, weights)
        chol = _chol_with_ridge(kernel_cov)
        moved = thetas + (chol @ rng.normal(size=(d_theta, p_particles))).T
        raw_mus = [None] * p_particles
        sigmas = [None] * p_particles
        for p in range(p_particles):
            raw_mus[p], sigmas[p] = particle_parts(moved[p])
            if raw_mus[p] is not None:
                store.insert(moved[p], raw_mus[p])
        logliks = np.full(p_particles, -np.inf)
        for p in range(p_particles):
            if sigmas[p] is None:
                continue
            if cfg.mu_mode == "regression":
                nb = store.knn(moved[p], min(l_neighbors, len(store)))
                mu = local_linear_predict(nb.thetas, nb.mus, moved[p]).mu
            else:
                mu = raw_mus[p]
            try:
                logliks[p] = gaussian_log_density(s_obs, SyntheticGaussian(mu, sigmas[p]))
            except NonInvertibleCovariance:
                pass
        log_prior_vals = np.array([float(prior_logpdf(th)) for th in moved])
        logw = tempered_mixture_logweights(
            moved, log_prior_vals, logliks, nu, thetas, weights, kernel_cov
        )
        total = _logsumexp(logw)
        if total == -np.inf:
            raise DegenerateWeights(t + 1)
        new_weights = np.exp(logw - total)
        new_weights = new_weights / new_weights.sum()
        clouds.append(ParticleCloud(moved.copy(), new_weights, logliks.copy(), t + 1))
        ancestors = systematic_resample(new_weights, rng)
        thetas = moved[ancestors]
        weights = np.full(p_particles, 1.0 / p_particles)
    return clouds
