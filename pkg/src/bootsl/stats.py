"""Summary statistics, the synthetic-likelihood Gaussian, and block combination.

Three data regimes are summarised here: i.i.d. real sequences (sample
standard deviation), paired predator/prey count series (9 statistics per
pair) and square spin grids (nearest-neighbour pair sum on the torus).
The Gaussian density built from estimated moments is what every
synthetic-likelihood variant ultimately evaluates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateSeries,
    EmptyInput,
    InsufficientSamples,
    InvalidScaling,
    InvalidSpin,
    InvalidTile,
    NonInvertibleCovariance,
    UnsupportedCombination,
)

__all__ = [
    "SyntheticGaussian",
    "BlockStatistic",
    "gaussian_log_density",
    "sample_mean",
    "sample_covariance",
    "repair_psd",
    "summarize_iid",
    "summarize_lv",
    "summarize_ising",
    "ising_tile_pair_sums",
    "ising_tile_rescale",
    "combine_block_statistics",
    "MEAN_AVERAGE",
    "EXTENSIVE_SUM",
]

# Combination rule tags for BlockStatistic.
MEAN_AVERAGE = "mean-average"
EXTENSIVE_SUM = "extensive-sum"

# Relative tolerance below which a negative eigenvalue is treated as rounding.
PSD_REL_TOL = 1e-10
# Condition-number ceiling for an invertible covariance.
MAX_CONDITION = 1e12


def repair_psd(cov: np.ndarray, rel_tol: float = PSD_REL_TOL) -> np.ndarray:
    """Symmetrise ``cov`` and repair tiny eigenvalue undershoot.

    Bootstrap averages of covariance estimates can lose positive
    semi-definiteness to rounding.  If the smallest eigenvalue is negative
    (or exactly zero) but within ``rel_tol`` of the largest, a ridge of
    ``|lambda_min| + 1e-12`` is added; a larger violation raises.

    Raises
    ------
    NonInvertibleCovariance
        If the matrix is non-PSD beyond tolerance.
    """
    cov = np.asarray(cov, dtype=float)
    cov = 0.5 * (cov + cov.T)
    eigvals = np.linalg.eigvalsh(cov)
    lo, hi = eigvals[0], eigvals[-1]
    if lo > 0.0:
        return cov
    if hi <= 0.0 or lo < -rel_tol * hi:
        raise NonInvertibleCovariance(
            f"covariance not PSD: eigenvalue range [{lo:.3e}, {hi:.3e}]"
        )
    return cov + (abs(lo) + 1e-12) * np.eye(cov.shape[0])


@dataclass(frozen=True)
class SyntheticGaussian:
    """Estimated mean and covariance of the summary-statistic distribution."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        if cov.shape != (mean.size, mean.size):
            raise ValueError(f"covariance shape {cov.shape} incompatible with mean dim {mean.size}")
        if not np.all(np.isfinite(mean)) or not np.all(np.isfinite(cov)):
            raise ValueError("mean and covariance must be finite")
        cov = repair_psd(cov)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def dim(self) -> int:
        return self.mean.size


def gaussian_log_density(s_obs: np.ndarray, g: SyntheticGaussian) -> float:
    """Log of the multivariate normal density N(s_obs | mean, covariance).

    Raises
    ------
    NonInvertibleCovariance
        If the covariance is singular or its condition number reaches 1e12.
    """
    s_obs = np.atleast_1d(np.asarray(s_obs, dtype=float))
    if s_obs.size != g.dim:
        raise ValueError(f"statistic dim {s_obs.size} != Gaussian dim {g.dim}")
    eigvals, eigvecs = np.linalg.eigh(g.covariance)
    lo, hi = eigvals[0], eigvals[-1]
    if lo <= 0.0 or hi / lo >= MAX_CONDITION:
        raise NonInvertibleCovariance(
            f"covariance condition number {hi / lo if lo > 0 else np.inf:.3e} exceeds {MAX_CONDITION:.0e}"
        )
    dev = eigvecs.T @ (s_obs - g.mean)
    quad = float(np.sum(dev * dev / eigvals))
    log_det = float(np.sum(np.log(eigvals)))
    return -0.5 * (g.dim * np.log(2.0 * np.pi) + log_det + quad)


def sample_mean(stats: list) -> np.ndarray:
    """Elementwise average of summary vectors."""
    if len(stats) == 0:
        raise EmptyInput("sample_mean of an empty list")
    arr = np.atleast_2d(np.asarray(stats, dtype=float))
    return arr.mean(axis=0)


def sample_covariance(stats: list) -> np.ndarray:
    """Sample covariance of summary vectors, denominator M - 1.

    Output is exactly symmetric; PSD up to rounding.
    """
    arr = np.atleast_2d(np.asarray(stats, dtype=float))
    m = arr.shape[0]
    if m < 2:
        raise InsufficientSamples(f"sample covariance needs at least 2 vectors, got {m}")
    dev = arr - arr.mean(axis=0)
    cov = dev.T @ dev / (m - 1)
    return 0.5 * (cov + cov.T)


def summarize_iid(data: np.ndarray) -> float:
    """Sample standard deviation (denominator N - 1) of an i.i.d. sequence."""
    data = np.asarray(data, dtype=float)
    if data.size < 2:
        raise InsufficientSamples(f"need at least 2 points, got {data.size}")
    return float(np.std(data, ddof=1))


def _autocorr(dev: np.ndarray, denom: float, lag: int) -> float:
    # Biased normalisation: lag-k cross products over the lag-0 sum of squares.
    return float(np.dot(dev[:-lag], dev[lag:]) / denom)


def summarize_lv(x: np.ndarray, y: np.ndarray, t_obs: np.ndarray | None = None) -> np.ndarray:
    """Nine summary statistics of a paired predator/prey series.

    Per series: mean, log sample variance, and lag-1/lag-2 autocorrelations
    (biased normalisation); plus the lag-0 cross-correlation between the two.
    With ``t_obs`` given, the raw vector is divided elementwise by it, so the
    observed data summarises to a vector of ones under its own scaling.

    Raises
    ------
    DegenerateSeries
        If either series has zero variance.
    InvalidScaling
        If ``t_obs`` contains a zero.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 3 or y.size < 3:
        raise InsufficientSamples("series must have length >= 3")
    raw = np.empty(9)
    ssq = []
    for k, series in enumerate((x, y)):
        dev = series - series.mean()
        denom = float(np.dot(dev, dev))
        if denom == 0.0:
            raise DegenerateSeries("zero-variance series")
        raw[4 * k] = series.mean()
        raw[4 * k + 1] = np.log(np.dot(dev, dev) / (series.size - 1))
        raw[4 * k + 2] = _autocorr(dev, denom, 1)
        raw[4 * k + 3] = _autocorr(dev, denom, 2)
        ssq.append(denom)
    dx, dy = x - x.mean(), y - y.mean()
    raw[8] = float(np.dot(dx, dy) / np.sqrt(ssq[0] * ssq[1]))
    if t_obs is None:
        return raw
    t_obs = np.asarray(t_obs, dtype=float)
    if t_obs.shape != (9,):
        raise ValueError("scaling vector must have 9 entries")
    if np.any(t_obs == 0.0):
        raise InvalidScaling("scaling vector contains a zero entry")
    return raw / t_obs


def _check_spins(grid: np.ndarray) -> np.ndarray:
    grid = np.asarray(grid)
    if grid.ndim != 2 or grid.shape[0] != grid.shape[1]:
        raise ValueError(f"spin grid must be square, got shape {grid.shape}")
    if grid.shape[0] < 3:
        raise ValueError("grid side must be at least 3")
    if not np.all(np.abs(grid) == 1):
        raise InvalidSpin("spin entries must be -1 or +1")
    return grid.astype(np.int64, copy=False)


def summarize_ising(grid: np.ndarray) -> float:
    """Nearest-neighbour pair sum on the torus, each unordered edge once.

    For an n x n grid there are 2n^2 edges, so the result lies in
    [-2n^2, 2n^2].
    """
    g = _check_spins(grid)
    s = np.sum(g * np.roll(g, 1, axis=0)) + np.sum(g * np.roll(g, 1, axis=1))
    return float(s)


def _window_sums(arr: np.ndarray, h: int, w: int) -> np.ndarray:
    # All (h, w) window sums of arr via a summed-area table; exact in int64.
    sat = np.zeros((arr.shape[0] + 1, arr.shape[1] + 1), dtype=np.int64)
    np.cumsum(np.cumsum(arr, axis=0), axis=1, out=sat[1:, 1:])
    return sat[h:, w:] - sat[:-h, w:] - sat[h:, :-w] + sat[:-h, :-w]


def ising_tile_pair_sums(grid: np.ndarray, tile_side: int) -> np.ndarray:
    """Pair sum of every tile_side x tile_side sub-tile, open boundary.

    Tiles never wrap: offsets run over (side - tile_side + 1)^2 positions,
    row-major, and only edges interior to a tile are counted.  These are the
    per-block statistics combined under the extensive-sum rule.
    """
    g = _check_spins(grid)
    side = g.shape[0]
    c = int(tile_side)
    if not 2 <= c <= side:
        raise ValueError(f"tile side {c} incompatible with grid side {side}")
    horiz = g[:, :-1] * g[:, 1:]
    vert = g[:-1, :] * g[1:, :]
    sums = _window_sums(horiz, c, c - 1) + _window_sums(vert, c - 1, c)
    return sums.astype(float).ravel()


def ising_tile_rescale(tile_side: int) -> float:
    """Correction factor for pair sums rebuilt from open-boundary tiles.

    A resample of N/B disjoint tiles carries 2N - 2N/sqrt(B) interior edges
    against 2N on the full torus, so the counted sum is scaled by
    2N / (2N - 2N/sqrt(B)) = tile_side / (tile_side - 1), independent of N.
    """
    if tile_side < 2:
        raise InvalidTile(f"tile side {tile_side} has no interior edges to rescale")
    return tile_side / (tile_side - 1.0)


@dataclass(frozen=True)
class BlockStatistic:
    """Per-block statistic values plus the rule for combining them.

    ``values`` has one row (or scalar entry) per block; ``block_size`` is the
    number of data points per block (B, or the tile area for spatial blocks).
    """

    values: np.ndarray
    block_size: int
    rule: str = MEAN_AVERAGE

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.block_size < 1:
            raise ValueError("block size must be positive")

    @property
    def n_blocks(self) -> int:
        return self.values.shape[0]


def combine_block_statistics(
    blocks: BlockStatistic, selection_counts: np.ndarray, rescale: float = 1.0
) -> np.ndarray | float:
    """Statistic of a block resample computed from per-block statistics.

    Under the mean-average rule the result is the weighted average of block
    means with weights ``n_b * B / N`` (N the materialised resample length),
    which reproduces the mean of the explicitly concatenated resample.  Under
    the extensive-sum rule the count-weighted sum is multiplied by the
    caller-supplied ``rescale`` factor.
    """
    counts = np.asarray(selection_counts)
    if counts.ndim != 1 or counts.size != blocks.n_blocks:
        raise ValueError(
            f"counts length {counts.size} != number of blocks {blocks.n_blocks}"
        )
    if np.any(counts < 0):
        raise ValueError("selection counts must be nonnegative")
    total = counts.sum()
    if total == 0:
        raise ValueError("selection counts sum to zero")
    if blocks.rule == MEAN_AVERAGE:
        resample_len = blocks.block_size * total
        weights = counts * blocks.block_size / resample_len
        return weights @ blocks.values
    if blocks.rule == EXTENSIVE_SUM:
        return (counts @ blocks.values) * rescale
    raise UnsupportedCombination(f"unknown combination rule {blocks.rule!r}")
