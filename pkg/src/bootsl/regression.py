"""History of (parameter, raw mean-statistic estimate) pairs with
nearest-neighbour queries and local linear prediction.

The sequential sampler stores one noisy raw estimate of the mean statistic
per particle and predicts the mean at new parameters by ordinary least
squares on the nearest stored points, trading single-estimate noise for the
averaging of many.  Neighbour distances are Euclidean on per-coordinate
standardized parameters so coordinates with different scales contribute
comparably.
"""

from __future__ import annotations

from collections import namedtuple

import numpy as np
from scipy.spatial import cKDTree

from .errors import InsufficientHistory

__all__ = ["MuStore", "Neighbors", "MuPrediction", "local_linear_predict"]

Neighbors = namedtuple("Neighbors", ["thetas", "mus", "indices"])
MuPrediction = namedtuple("MuPrediction", ["mu", "fallback_mean"])


class MuStore:
    """Growable store of (theta, raw mu) pairs indexed for nearest-neighbour
    lookup.  Queries see exactly the points inserted so far; the spatial
    index is rebuilt lazily after inserts."""

    def __init__(self, theta_dim: int, mu_dim: int):
        if theta_dim < 1 or mu_dim < 1:
            raise ValueError("dimensions must be positive")
        self.theta_dim = theta_dim
        self.mu_dim = mu_dim
        self._thetas: list = []
        self._mus: list = []
        self._tree = None
        self._scale = None
        self._built = 0

    def __len__(self) -> int:
        return len(self._thetas)

    def insert(self, theta, raw_mu) -> None:
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        raw_mu = np.atleast_1d(np.asarray(raw_mu, dtype=float))
        if theta.shape != (self.theta_dim,):
            raise ValueError(f"theta shape {theta.shape}, expected ({self.theta_dim},)")
        if raw_mu.shape != (self.mu_dim,):
            raise ValueError(f"mu shape {raw_mu.shape}, expected ({self.mu_dim},)")
        self._thetas.append(theta)
        self._mus.append(raw_mu)

    def _rebuild(self):
        arr = np.asarray(self._thetas)
        scale = arr.std(axis=0)
        scale[scale == 0.0] = 1.0
        self._scale = scale
        self._tree = cKDTree(arr / scale)
        self._built = len(self._thetas)

    def knn(self, theta, l: int) -> Neighbors:
        """The ``l`` stored points nearest to ``theta`` in standardized
        Euclidean distance; exact ties broken by insertion order."""
        if l < 1:
            raise ValueError("need at least one neighbour")
        size = len(self._thetas)
        if size < l:
            raise InsufficientHistory(f"store holds {size} points, query wants {l}")
        if self._built != size:
            self._rebuild()
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        q = theta / self._scale
        dist, _ = self._tree.query(q, k=l)
        radius = float(np.atleast_1d(dist)[-1])
        cand = self._tree.query_ball_point(q, radius * (1.0 + 1e-12) + 1e-300)
        cand = np.asarray(sorted(cand), dtype=np.int64)
        pts = np.asarray(self._thetas)[cand] / self._scale
        d = np.sqrt(((pts - q) ** 2).sum(axis=1))
        order = np.lexsort((cand, d))[:l]
        idx = cand[order]
        return Neighbors(
            np.asarray(self._thetas)[idx].copy(),
            np.asarray(self._mus)[idx].copy(),
            idx,
        )

    def dump(self, path) -> None:
        """Write all pairs as delimited text: theta columns then mu columns."""
        header = ",".join(
            [f"theta_{i}" for i in range(self.theta_dim)]
            + [f"mu_{j}" for j in range(self.mu_dim)]
        )
        arr = np.hstack([np.asarray(self._thetas), np.asarray(self._mus)])
        np.savetxt(path, arr, fmt="%.17g", delimiter=",", header=header, comments="")


def local_linear_predict(thetas, mus, theta_query) -> MuPrediction:
    """Fitted value at ``theta_query`` of per-coordinate least squares of mu
    on (1, theta) over the given neighbours.

    A rank-deficient design (too few points, or affinely dependent
    parameters) falls back to the plain neighbour mean, flagged in the
    result.
    """
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    mus = np.atleast_2d(np.asarray(mus, dtype=float))
    if thetas.shape[0] != mus.shape[0]:
        raise ValueError("neighbour lists disagree in length")
    theta_query = np.atleast_1d(np.asarray(theta_query, dtype=float))
    design = np.hstack([np.ones((thetas.shape[0], 1)), thetas])
    coef, _, rank, _ = np.linalg.lstsq(design, mus, rcond=None)
    if rank < design.shape[1]:
        return MuPrediction(mus.mean(axis=0), True)
    row = np.concatenate([[1.0], theta_query])
    return MuPrediction(row @ coef, False)
