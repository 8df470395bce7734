"""Chain and cloud quality metrics, replicate error summaries, and kernel
density estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateBandwidth, InsufficientSamples

__all__ = ["iat", "ess_weights", "ReplicateReport", "replicate_metrics", "kde"]


def _autocorrelations(x: np.ndarray) -> np.ndarray:
    # Normalised autocorrelation via FFT; lag 0 has value 1.
    n = x.size
    dev = x - x.mean()
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(dev, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n].real / n
    return acov / acov[0]


def iat(chain: np.ndarray) -> float:
    """Integrated autocorrelation time, 1 + 2*sum of autocorrelations.

    The sum is truncated by the initial-positive-sequence rule: consecutive
    lag pairs (rho_1+rho_2), (rho_3+rho_4), ... are accumulated while
    positive, which keeps the estimate at least 1.  A constant chain has no
    autocorrelation content and returns inf as a marker.
    """
    chain = np.asarray(chain, dtype=float).ravel()
    if chain.size < 100:
        raise InsufficientSamples(f"need at least 100 points, got {chain.size}")
    if np.all(chain == chain[0]):
        return math.inf
    rho = _autocorrelations(chain)
    total = 0.0
    for j in range(1, (rho.size - 1) // 2):
        pair = rho[2 * j - 1] + rho[2 * j]
        if pair <= 0.0:
            break
        total += pair
    return 1.0 + 2.0 * total


def ess_weights(weights: np.ndarray) -> float:
    """Effective sample size 1 / sum(w^2) of normalized weights."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("weights must be a nonempty vector")
    if np.any(w < 0.0):
        raise ValueError("weights must be nonnegative")
    return float(1.0 / np.sum(w * w))


@dataclass(frozen=True)
class ReplicateReport:
    """Error of repeated estimates against a known truth.

    ``sd`` uses the population convention so that rmse^2 = bias^2 + sd^2
    holds exactly.
    """

    bias: float
    sd: float
    rmse: float
    n_replicates: int


def replicate_metrics(estimates: np.ndarray, truth: float) -> ReplicateReport:
    est = np.asarray(estimates, dtype=float).ravel()
    if est.size < 2:
        raise InsufficientSamples(f"need at least 2 replicates, got {est.size}")
    bias = float(est.mean() - truth)
    sd = float(est.std(ddof=0))
    return ReplicateReport(bias, sd, math.hypot(bias, sd), est.size)


def _weighted_quantile(sorted_samples: np.ndarray, sorted_weights: np.ndarray, q: float) -> float:
    cum = np.cumsum(sorted_weights)
    return float(sorted_samples[np.searchsorted(cum, q * cum[-1], side="left")])


def kde(samples: np.ndarray, grid: np.ndarray, weights: np.ndarray | None = None) -> np.ndarray:
    """Weighted Gaussian kernel density estimate on ``grid``.

    Bandwidth follows the 0.9 * min(sd, IQR/1.34) * n^(-1/5) rule of thumb,
    with the effective sample size of the weights as n.
    """
    samples = np.asarray(samples, dtype=float).ravel()
    grid = np.asarray(grid, dtype=float).ravel()
    if samples.size < 2 or np.unique(samples).size < 2:
        raise InsufficientSamples("need at least 2 distinct samples")
    if weights is None:
        w = np.full(samples.size, 1.0 / samples.size)
    else:
        w = np.asarray(weights, dtype=float).ravel()
        if w.shape != samples.shape:
            raise ValueError("weights must match samples")
        if np.any(w < 0.0) or w.sum() <= 0.0:
            raise ValueError("weights must be nonnegative with positive total")
        w = w / w.sum()
    n_eff = ess_weights(w)
    mean = float(np.dot(w, samples))
    sd = math.sqrt(max(np.dot(w, (samples - mean) ** 2), 0.0))
    order = np.argsort(samples, kind="stable")
    iqr = _weighted_quantile(samples[order], w[order], 0.75) - _weighted_quantile(
        samples[order], w[order], 0.25
    )
    spread = min(sd, iqr / 1.34) if iqr > 0.0 else sd
    h = 0.9 * spread * n_eff ** (-0.2)
    if not h > 0.0:
        raise DegenerateBandwidth(f"bandwidth {h} from degenerate sample spread")
    z = (grid[:, None] - samples[None, :]) / h
    dens = np.exp(-0.5 * z * z) @ w / (h * math.sqrt(2.0 * math.pi))
    return dens
