"""Approximate log-likelihood estimators.

Five estimators share one shape: simulate M datasets at theta, reduce them to
summary statistics, and compare with the observed statistic.  The plain
synthetic likelihood fits a Gaussian to the M statistics; the bootstrap
variants replace its covariance with an average of within-dataset bootstrap
covariances, which stays useful down to M = 1; the kernel variants average a
Gaussian kernel over simulated (or resampled) statistics.

Models are small adapter objects bundling a simulator with its summary
statistic and its resample-statistic rule, so every estimator works on any
of the data regimes.  Reductions over the M datasets use correctly rounded
summation, making results independent of reduction order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import CorruptPlan, DegenerateSeries, InsufficientSamples
from .resampling import (
    BlockCountPlan,
    IidIndexPlan,
    PointCountPlan,
)
from .simulators import gillespie_lv, ising_gibbs, simulate_gaussian_iid
from .stats import (
    SyntheticGaussian,
    gaussian_log_density,
    ising_tile_pair_sums,
    ising_tile_rescale,
    summarize_iid,
    summarize_ising,
    summarize_lv,
)

__all__ = [
    "EstimatorConfig",
    "ToyModel",
    "LvModel",
    "IsingModel",
    "sl_loglik",
    "bsl_sigma",
    "bsl_loglik",
    "blbsl_sigma",
    "blbsl_loglik",
    "estimate_mu_raw",
    "abc_loglik",
    "babc_loglik",
    "iid_resample_stats",
]

KINDS = ("SL", "B-SL", "BLB-SL", "ABC", "B-ABC")
MU_MODES = ("estimated", "oracle", "regression", "rescaled-raw")


@dataclass(frozen=True)
class EstimatorConfig:
    """Estimator family plus its tuning constants.

    ``m`` simulations per evaluation; ``r`` resamples per simulation
    (bootstrap kinds); ``epsilon`` the kernel bandwidth (kernel kinds);
    ``n`` the subsample size and ``block_len`` the block length where the
    resampling scheme uses them.
    """

    kind: str
    m: int
    r: int = 0
    epsilon: float = 0.0
    n: int = 0
    block_len: int = 0
    mu_mode: str = "estimated"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown estimator kind {self.kind!r}")
        if self.mu_mode not in MU_MODES:
            raise ValueError(f"unknown mu mode {self.mu_mode!r}")
        if self.kind == "SL" and self.m < 2:
            raise ValueError("SL needs at least 2 simulations for a covariance")
        if self.kind in ("B-SL", "BLB-SL"):
            if self.m < 1:
                raise ValueError("bootstrap estimators need at least one simulation")
            if self.r < 2:
                raise ValueError("bootstrap estimators need at least 2 resamples")
        if self.kind in ("ABC", "B-ABC"):
            if self.m < 1:
                raise ValueError("kernel estimators need at least one simulation")
            if not self.epsilon > 0.0:
                raise ValueError("kernel estimators need a positive bandwidth")
        if self.kind == "B-ABC" and self.r < 1:
            raise ValueError("resampled kernel estimator needs at least 1 resample")


# ---------------------------------------------------------------- reductions


def _fsum_mean_rows(arr: np.ndarray) -> np.ndarray:
    # Correctly rounded column means, independent of row order.
    m, d = arr.shape
    return np.array([math.fsum(arr[:, j]) / m for j in range(d)])


def _fsum_cov_rows(arr: np.ndarray) -> np.ndarray:
    m, d = arr.shape
    if m < 2:
        raise InsufficientSamples(f"covariance needs at least 2 rows, got {m}")
    dev = arr - _fsum_mean_rows(arr)
    cov = np.empty((d, d))
    for a in range(d):
        for b in range(a, d):
            cov[a, b] = cov[b, a] = math.fsum(dev[:, a] * dev[:, b]) / (m - 1)
    return cov


# ---------------------------------------------------------------- models


def _theta_scalar(theta) -> float:
    arr = np.asarray(theta, dtype=float).ravel()
    if arr.size != 1:
        raise ValueError(f"expected a scalar parameter, got shape {arr.shape}")
    return float(arr[0])


def _plan_counts(data_len: int, plan) -> np.ndarray:
    if isinstance(plan, IidIndexPlan):
        if plan.n_points != data_len:
            raise CorruptPlan(f"plan resamples {plan.n_points} points, data has {data_len}")
        return np.stack([np.bincount(row, minlength=data_len) for row in plan.indices])
    if isinstance(plan, PointCountPlan):
        if plan.n_values != data_len:
            raise CorruptPlan(f"plan counts {plan.n_values} points, data has {data_len}")
        return plan.counts
    raise CorruptPlan(f"plan type {type(plan).__name__} unsupported for i.i.d. data")


def _weighted_stat_rows(values: np.ndarray, counts: np.ndarray, kind: str) -> np.ndarray:
    # Vectorised mean/sd over count rows; every row of a shared plan goes
    # through the identical sequence of operations, so index plans and
    # count plans with equal multiplicities give bitwise-equal results.
    totals = counts.sum(axis=1).astype(float)
    shifted = values - values.mean()
    s1 = counts @ shifted
    if kind == "mean":
        return values.mean() + s1 / totals
    s2 = counts @ (shifted * shifted)
    var = (s2 - s1 * s1 / totals) / (totals - 1.0)
    return np.sqrt(np.maximum(var, 0.0))


def iid_resample_stats(data: np.ndarray, plan, kind: str = "sd") -> np.ndarray:
    """Per-resample statistic values (R,) for an i.i.d. dataset under an
    index or count plan.  Kinds: ``mean`` or ``sd``."""
    data = np.asarray(data, dtype=float)
    if kind not in ("mean", "sd"):
        raise ValueError(f"unsupported resample statistic {kind!r}")
    return _weighted_stat_rows(data, _plan_counts(data.size, plan), kind)


def _batch_series_summaries(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    # Vectorised form of summarize_lv over R materialised resamples.
    r, n = xs.shape
    out = np.empty((r, 9))
    ss = []
    devs = []
    for k, s in enumerate((xs, ys)):
        mean = s.mean(axis=1)
        dev = s - mean[:, None]
        s0 = np.einsum("rn,rn->r", dev, dev)
        if np.any(s0 == 0.0):
            raise DegenerateSeries("zero-variance resampled series")
        out[:, 4 * k] = mean
        out[:, 4 * k + 1] = np.log(s0 / (n - 1))
        out[:, 4 * k + 2] = np.einsum("rn,rn->r", dev[:, :-1], dev[:, 1:]) / s0
        out[:, 4 * k + 3] = np.einsum("rn,rn->r", dev[:, :-2], dev[:, 2:]) / s0
        ss.append(s0)
        devs.append(dev)
    out[:, 8] = np.einsum("rn,rn->r", devs[0], devs[1]) / np.sqrt(ss[0] * ss[1])
    return out


@dataclass(frozen=True)
class ToyModel:
    """I.i.d. zero-mean Gaussian data; parameter is the precision; statistic
    is the sample standard deviation."""

    n_points: int

    def simulate_m(self, theta, m: int, rng: np.random.Generator) -> list:
        tau = _theta_scalar(theta)
        if not tau > 0.0:
            raise DegenerateSeries(f"nonpositive precision {tau}")
        block = simulate_gaussian_iid(m * self.n_points, tau, rng)
        return list(block.reshape(m, self.n_points))

    def summarize(self, data) -> np.ndarray:
        return np.array([summarize_iid(data)])

    def resample_stats(self, data, plan) -> np.ndarray:
        return iid_resample_stats(data, plan, "sd")[:, None]


@dataclass(frozen=True)
class LvModel:
    """Predator-prey count series; parameter is the three reaction rates;
    statistic is the 9-vector of scaled moments and correlations."""

    t_obs: np.ndarray
    n_obs: int = 32
    dt: float = 2.0
    x0: int = 50
    y0: int = 100

    def simulate_m(self, theta, m: int, rng: np.random.Generator) -> list:
        seeds = rng.integers(0, 2**32, size=m)
        return [
            gillespie_lv(theta, int(s), n_obs=self.n_obs, dt=self.dt, x0=self.x0, y0=self.y0)
            for s in seeds
        ]

    def summarize(self, path) -> np.ndarray:
        if path.diverged:
            raise DegenerateSeries("simulation hit its event or population cap")
        return summarize_lv(path.x, path.y, self.t_obs)

    def resample_stats(self, path, plan) -> np.ndarray:
        if not isinstance(plan, BlockCountPlan) or plan.block_set.tile_side > 0:
            raise CorruptPlan("series resampling needs a temporal block plan")
        if path.diverged:
            raise DegenerateSeries("simulation hit its event or population cap")
        bset = plan.block_set
        if bset.n_points != self.n_obs:
            raise CorruptPlan(f"plan covers {bset.n_points} points, series has {self.n_obs}")
        offsets = np.arange(bset.block_len, dtype=np.int64)
        rows = []
        for row in plan.counts:
            picked = np.repeat(bset.starts, row)
            rows.append((picked[:, None] + offsets[None, :]).ravel())
        idx = np.stack(rows)
        return _batch_series_summaries(path.x[idx], path.y[idx]) / self.t_obs


@dataclass(frozen=True)
class IsingModel:
    """Square spin grid; parameter is the pairwise coupling; statistic is
    the torus pair sum.  ``obs_side`` sets the extensive scale target when
    the simulated grid is a smaller subsample."""

    side: int
    sweeps: int = 10
    obs_side: int = 0

    def simulate_m(self, theta, m: int, rng: np.random.Generator) -> list:
        th = _theta_scalar(theta)
        return [ising_gibbs(self.side, th, rng, sweeps=self.sweeps) for _ in range(m)]

    def summarize(self, grid) -> np.ndarray:
        return np.array([summarize_ising(grid)])

    @property
    def mu_scale(self) -> float:
        # Pair sums are extensive: a full-size grid has (obs_side/side)^2
        # times as many edges as the simulated one.
        if self.obs_side == 0:
            return 1.0
        return (self.obs_side / self.side) ** 2

    def resample_stats(self, grid, plan) -> np.ndarray:
        if not isinstance(plan, BlockCountPlan) or plan.block_set.tile_side == 0:
            raise CorruptPlan("grid resampling needs a spatial tile plan")
        bset = plan.block_set
        if bset.n_points != self.side * self.side:
            raise CorruptPlan(f"plan covers {bset.n_points} sites, grid has {self.side ** 2}")
        tile_sums = ising_tile_pair_sums(grid, bset.tile_side)
        rescale = ising_tile_rescale(bset.tile_side)
        return (plan.counts @ tile_sums * rescale)[:, None]


# ---------------------------------------------------------------- estimators


def _stats_matrix(model, datasets) -> np.ndarray:
    return np.stack([model.summarize(d) for d in datasets])


def estimate_mu_raw(stats_n, mode: str = "average", scale: float = 1.0) -> np.ndarray:
    """Mean-statistic estimate from M size-n statistics.

    ``average`` takes the plain elementwise mean; ``extensive`` multiplies
    each statistic by ``scale`` (the full-to-subsample size ratio) first.
    """
    arr = np.atleast_2d(np.asarray(stats_n, dtype=float))
    if arr.shape[0] < 1:
        raise InsufficientSamples("need at least one statistic")
    if mode == "extensive":
        arr = arr * scale
    elif mode != "average":
        raise ValueError(f"unknown raw-mean mode {mode!r}")
    return _fsum_mean_rows(arr)


def _resolve_mu(stats: np.ndarray, cfg: EstimatorConfig, mu_override, mu_scale: float):
    if cfg.mu_mode == "estimated":
        return _fsum_mean_rows(stats)
    if cfg.mu_mode == "rescaled-raw":
        return estimate_mu_raw(stats, "extensive", mu_scale)
    if mu_override is None:
        raise ValueError(f"mu mode {cfg.mu_mode!r} needs an explicit mean")
    return np.atleast_1d(np.asarray(mu_override, dtype=float))


def sl_loglik(theta, s_obs, model, cfg: EstimatorConfig, rng, mu_override=None) -> float:
    """Gaussian log density of the observed statistic under the mean and
    covariance of M simulated statistics."""
    if cfg.m < 2:
        raise ValueError("covariance from simulations needs at least 2 of them")
    try:
        stats = _stats_matrix(model, model.simulate_m(theta, cfg.m, rng))
    except DegenerateSeries:
        return -np.inf
    mu = _resolve_mu(stats, cfg, mu_override, 1.0)
    sigma = _fsum_cov_rows(stats)
    return gaussian_log_density(s_obs, SyntheticGaussian(mu, sigma))


def _sigma_from_datasets(model, datasets, plan) -> np.ndarray:
    covs = [_fsum_cov_rows(model.resample_stats(d, plan)) for d in datasets]
    d = covs[0].shape[0]
    out = np.empty((d, d))
    for a in range(d):
        for b in range(d):
            out[a, b] = math.fsum(c[a, b] for c in covs) / len(covs)
    return out


def bsl_sigma(theta, model, cfg: EstimatorConfig, plan, rng) -> np.ndarray:
    """Bootstrap covariance estimate: for each of M simulated datasets, the
    sample covariance of its R resample statistics; averaged over datasets.

    Works for M = 1.  The plan is shared across datasets (and across calls),
    so the resampling noise is common."""
    datasets = model.simulate_m(theta, cfg.m, rng)
    return _sigma_from_datasets(model, datasets, plan)


def bsl_loglik(theta, s_obs, model, cfg: EstimatorConfig, plan, rng, mu_override=None) -> float:
    """Synthetic likelihood with the bootstrap covariance: mean from the M
    full-size simulated statistics, covariance from their resamples."""
    try:
        datasets = model.simulate_m(theta, cfg.m, rng)
        stats = _stats_matrix(model, datasets)
        sigma = _sigma_from_datasets(model, datasets, plan)
    except DegenerateSeries:
        return -np.inf
    mu = _resolve_mu(stats, cfg, mu_override, 1.0)
    return gaussian_log_density(s_obs, SyntheticGaussian(mu, sigma))


def blbsl_sigma(theta, model, cfg: EstimatorConfig, plan, rng) -> np.ndarray:
    """Covariance from size-n simulations and virtual full-size resamples.

    Statistics of the virtual resamples are evaluated through selection
    counts, never materialised.  With n equal to the full size and matching
    multiplicities this is exactly the standard bootstrap covariance."""
    datasets = model.simulate_m(theta, cfg.m, rng)
    return _sigma_from_datasets(model, datasets, plan)


def blbsl_loglik(
    theta, s_obs, model, cfg: EstimatorConfig, plan, rng,
    mu_override=None, mu_scale: float = 1.0,
) -> float:
    """Synthetic likelihood with subsampled simulations: mean from the M
    size-n statistics (averaged, rescaled, or supplied), covariance from
    count-based resamples."""
    try:
        datasets = model.simulate_m(theta, cfg.m, rng)
        stats = _stats_matrix(model, datasets)
        sigma = _sigma_from_datasets(model, datasets, plan)
    except DegenerateSeries:
        return -np.inf
    mu = _resolve_mu(stats, cfg, mu_override, mu_scale)
    return gaussian_log_density(s_obs, SyntheticGaussian(mu, sigma))


def _log_kernel_row(diffs: np.ndarray, eps: float) -> np.ndarray:
    # Isotropic Gaussian kernel, per-coordinate standard deviation eps.
    d = diffs.shape[1]
    sq = np.einsum("md,md->m", diffs, diffs)
    return -0.5 * (d * math.log(2.0 * math.pi * eps * eps) + sq / (eps * eps))


def abc_loglik(theta, s_obs, model, cfg: EstimatorConfig, rng) -> float:
    """Log of the average Gaussian kernel value over M simulated statistics.

    Degenerate simulations contribute zero kernel mass; if every simulation
    is degenerate the result is -inf, a valid rejection."""
    s_obs = np.atleast_1d(np.asarray(s_obs, dtype=float))
    logs = np.full(cfg.m, -np.inf)
    datasets = model.simulate_m(theta, cfg.m, rng)
    for i, data in enumerate(datasets):
        try:
            diff = model.summarize(data) - s_obs
        except DegenerateSeries:
            continue
        logs[i] = _log_kernel_row(diff[None, :], cfg.epsilon)[0]
    return float(logsumexp(logs) - math.log(cfg.m))


def babc_loglik(theta, s_obs, model, cfg: EstimatorConfig, plan, rng) -> float:
    """Kernel estimator averaged over bootstrap resamples: per simulated
    dataset, average the kernel over its R resample statistics; then average
    over datasets.  Averaging over resamples only."""
    s_obs = np.atleast_1d(np.asarray(s_obs, dtype=float))
    per_m = np.full(cfg.m, -np.inf)
    datasets = model.simulate_m(theta, cfg.m, rng)
    for i, data in enumerate(datasets):
        try:
            rs = model.resample_stats(data, plan)
        except DegenerateSeries:
            continue
        logs = _log_kernel_row(rs - s_obs, cfg.epsilon)
        per_m[i] = logsumexp(logs) - math.log(rs.shape[0])
    return float(logsumexp(per_m) - math.log(cfg.m))
