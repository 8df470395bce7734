"""Resampling plans: shared index matrices, block catalogues, and count draws.

A plan is drawn once per run and reused for every simulated dataset and every
parameter value, so the bootstrap noise is common across likelihood
evaluations.  Three layouts cover the use cases: explicit index matrices for
i.i.d. data, block-selection counts over a catalogue of overlapping blocks
(temporal runs or spatial tiles), and per-point multiplicity counts for
small-subsample resampling whose virtual resamples are never materialised.

``weighted_statistic`` evaluates mean, variance and standard deviation of a
counted multiset with correctly rounded summation, so its output is bitwise
identical to summing an explicit expansion of the multiset with fsum.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    CorruptPlan,
    InsufficientResamples,
    InsufficientSamples,
    InvalidBlockLength,
    InvalidTile,
    UnsupportedStatistic,
)

__all__ = [
    "IidIndexPlan",
    "BlockSet",
    "BlockCountPlan",
    "PointCountPlan",
    "make_iid_plan",
    "make_block_set",
    "make_spatial_block_set",
    "make_block_plan",
    "make_blb_point_counts",
    "counts_from_indices",
    "resample_iid",
    "materialize_block_resample",
    "weighted_statistic",
    "save_plan",
    "load_plan",
]


@dataclass(frozen=True)
class IidIndexPlan:
    """Resample index matrix: row r holds the N draws of resample r."""

    indices: np.ndarray
    seed: int

    @property
    def n_resamples(self) -> int:
        return self.indices.shape[0]

    @property
    def n_points(self) -> int:
        return self.indices.shape[1]


@dataclass(frozen=True)
class BlockSet:
    """Catalogue of overlapping blocks of a dataset of ``n_points``.

    Temporal: ``starts`` are run start offsets and ``block_len`` consecutive
    points form a block.  Spatial (``tile_side`` > 0): ``starts`` are
    row-major tile ids over a square grid and ``block_len`` is the tile area.
    """

    n_points: int
    block_len: int
    starts: np.ndarray
    tile_side: int = 0

    @property
    def n_blocks(self) -> int:
        return self.starts.size


@dataclass(frozen=True)
class BlockCountPlan:
    """Block-selection counts: row r gives how often each block appears."""

    block_set: BlockSet
    counts: np.ndarray
    target_size: int
    seed: int

    @property
    def n_resamples(self) -> int:
        return self.counts.shape[0]

    @property
    def blocks_per_resample(self) -> int:
        return self.target_size // self.block_set.block_len


@dataclass(frozen=True)
class PointCountPlan:
    """Point multiplicities: row r gives each point's count in a virtual
    resample of ``target_size`` draws."""

    counts: np.ndarray
    target_size: int
    seed: int

    @property
    def n_resamples(self) -> int:
        return self.counts.shape[0]

    @property
    def n_values(self) -> int:
        return self.counts.shape[1]


def _check_resamples(n_resamples: int):
    if n_resamples < 2:
        raise InsufficientResamples(
            f"need at least 2 resamples for a variance, got {n_resamples}"
        )


def make_iid_plan(n_points: int, n_resamples: int, seed: int) -> IidIndexPlan:
    """Draw an R x N matrix of uniform indices into a dataset of N points."""
    _check_resamples(n_resamples)
    if n_points < 2:
        raise InsufficientSamples(f"cannot resample {n_points} points")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, n_points, size=(n_resamples, n_points), dtype=np.int64)
    return IidIndexPlan(idx, int(seed))


def make_block_set(n_points: int, block_len: int) -> BlockSet:
    """All overlapping runs of ``block_len`` consecutive points.

    ``block_len`` must divide ``n_points`` so that a whole number of blocks
    rebuilds a resample of the original length.
    """
    if block_len < 1 or block_len > n_points:
        raise InvalidBlockLength(f"block length {block_len} outside [1, {n_points}]")
    if n_points % block_len != 0:
        raise InvalidBlockLength(
            f"block length {block_len} does not divide series length {n_points}"
        )
    starts = np.arange(n_points - block_len + 1, dtype=np.int64)
    return BlockSet(int(n_points), int(block_len), starts)


def make_spatial_block_set(side: int, tile_side: int) -> BlockSet:
    """All overlapping square tiles of a side x side grid.

    ``tile_side`` must divide ``side`` so the grid can also be cut into
    disjoint tiles of the same shape.  Tile ids are row-major over the
    (side - tile_side + 1)^2 admissible corners.
    """
    if tile_side < 2 or tile_side > side:
        raise InvalidTile(f"tile side {tile_side} outside [2, {side}]")
    if side % tile_side != 0:
        raise InvalidTile(f"tile side {tile_side} does not divide grid side {side}")
    n_offsets = (side - tile_side + 1) ** 2
    starts = np.arange(n_offsets, dtype=np.int64)
    return BlockSet(int(side * side), int(tile_side * tile_side), starts, int(tile_side))


def make_block_plan(
    block_set: BlockSet, n_resamples: int, target_size: int, seed: int
) -> BlockCountPlan:
    """Draw block-selection counts for R resamples of ``target_size`` points.

    Each resample takes ``target_size / block_len`` blocks uniformly with
    replacement; only the multiplicities are stored.
    """
    _check_resamples(n_resamples)
    if target_size < 1 or target_size % block_set.block_len != 0:
        raise InvalidBlockLength(
            f"target size {target_size} is not a multiple of block length {block_set.block_len}"
        )
    k = target_size // block_set.block_len
    rng = np.random.default_rng(seed)
    probs = np.full(block_set.n_blocks, 1.0 / block_set.n_blocks)
    counts = rng.multinomial(k, probs, size=n_resamples).astype(np.int64)
    return BlockCountPlan(block_set, counts, int(target_size), int(seed))


def make_blb_point_counts(
    n_values: int, n_resamples: int, target_size: int, seed: int
) -> PointCountPlan:
    """Draw point multiplicities for R virtual resamples of ``target_size``
    draws from ``n_values`` points."""
    _check_resamples(n_resamples)
    if n_values < 2:
        raise InsufficientSamples(f"cannot resample {n_values} points")
    if target_size < 1:
        raise ValueError("target size must be positive")
    rng = np.random.default_rng(seed)
    probs = np.full(n_values, 1.0 / n_values)
    counts = rng.multinomial(target_size, probs, size=n_resamples).astype(np.int64)
    return PointCountPlan(counts, int(target_size), int(seed))


def counts_from_indices(plan: IidIndexPlan) -> PointCountPlan:
    """Multiplicity view of an index plan: same draws, count representation.

    With a full-size subsample this makes the count-based path evaluate the
    identical multiset as the materialising path.
    """
    n = plan.n_points
    counts = np.stack([np.bincount(row, minlength=n) for row in plan.indices])
    return PointCountPlan(counts.astype(np.int64), n, plan.seed)


def resample_iid(data: np.ndarray, plan: IidIndexPlan, r: int) -> np.ndarray:
    """Materialise resample ``r``: ``data`` indexed by row r of the plan."""
    data = np.asarray(data)
    row = plan.indices[r]
    if row.min() < 0 or row.max() >= data.shape[0]:
        raise CorruptPlan(
            f"plan indexes up to {row.max()} but data has {data.shape[0]} points"
        )
    return data[row]


def materialize_block_resample(data: np.ndarray, plan: BlockCountPlan, r: int) -> np.ndarray:
    """Concatenate the selected blocks of resample ``r`` in catalogue order.

    Each block appears as many times as its count; the result has
    ``target_size`` points.  Spatial tile plans have no serial order and
    cannot be materialised this way.
    """
    bset = plan.block_set
    if bset.tile_side > 0:
        raise CorruptPlan("spatial tile plans cannot be materialised as a series")
    data = np.asarray(data)
    if data.shape[0] != bset.n_points:
        raise CorruptPlan(
            f"plan built for {bset.n_points} points but data has {data.shape[0]}"
        )
    row = plan.counts[r]
    offsets = np.arange(bset.block_len, dtype=np.int64)
    picked = np.repeat(bset.starts, row)
    idx = (picked[:, None] + offsets[None, :]).ravel()
    return data[idx]


def _exact_counted_sum(values: np.ndarray, counts: np.ndarray) -> float:
    # Correctly rounded sum of counts[i] copies of values[i].  Each count is
    # split into powers of two; value * 2^k is exact, and fsum rounds the
    # full term list once.
    terms = []
    cmax = int(counts.max())
    k = 0
    while (1 << k) <= cmax:
        mask = (counts >> k) & 1 == 1
        if mask.any():
            terms.append(np.ldexp(values[mask], k))
        k += 1
    if not terms:
        return 0.0
    return math.fsum(np.concatenate(terms))


def weighted_statistic(values: np.ndarray, counts: np.ndarray, kind: str = "mean") -> float:
    """Statistic of the multiset holding ``counts[i]`` copies of ``values[i]``.

    Kinds: ``mean``, ``variance`` (denominator total - 1), ``sd``.  Summation
    is correctly rounded, so the result equals fsum over an explicit
    expansion of the multiset bit for bit, in any expansion order.
    """
    values = np.asarray(values, dtype=float)
    counts = np.asarray(counts)
    if values.ndim != 1 or values.shape != counts.shape:
        raise ValueError(f"values shape {values.shape} != counts shape {counts.shape}")
    if np.any(counts < 0):
        raise ValueError("counts must be nonnegative")
    counts = counts.astype(np.int64)
    total = int(counts.sum())
    if kind == "mean":
        if total < 1:
            raise InsufficientSamples("empty multiset")
        return _exact_counted_sum(values, counts) / total
    if kind in ("variance", "sd"):
        if total < 2:
            raise InsufficientSamples(f"variance needs at least 2 draws, got {total}")
        mean = _exact_counted_sum(values, counts) / total
        sq = (values - mean) ** 2
        var = _exact_counted_sum(sq, counts) / (total - 1)
        return math.sqrt(var) if kind == "sd" else var
    raise UnsupportedStatistic(f"unknown statistic kind {kind!r}")


# ---------------------------------------------------------------- plan files

_MAGIC = b"BSLP"
_VERSION = 1
_CODE_IID = 1
_CODE_BLOCK = 2
_CODE_POINT = 3


def save_plan(path, plan) -> None:
    """Write a plan to ``path`` in a fixed little-endian binary layout."""
    if isinstance(plan, IidIndexPlan):
        head = struct.pack(
            "<4sBBqqQ", _MAGIC, _VERSION, _CODE_IID, plan.n_resamples, plan.n_points, plan.seed
        )
        body = plan.indices
    elif isinstance(plan, BlockCountPlan):
        bset = plan.block_set
        head = struct.pack(
            "<4sBBqqqqqQ",
            _MAGIC,
            _VERSION,
            _CODE_BLOCK,
            bset.n_points,
            bset.block_len,
            bset.tile_side,
            plan.n_resamples,
            plan.target_size,
            plan.seed,
        )
        body = plan.counts
    elif isinstance(plan, PointCountPlan):
        head = struct.pack(
            "<4sBBqqqQ",
            _MAGIC,
            _VERSION,
            _CODE_POINT,
            plan.n_resamples,
            plan.n_values,
            plan.target_size,
            plan.seed,
        )
        body = plan.counts
    else:
        raise TypeError(f"not a plan: {type(plan).__name__}")
    with open(path, "wb") as f:
        f.write(head)
        f.write(np.ascontiguousarray(body, dtype="<i8").tobytes())


def _read_exact(f, n: int) -> bytes:
    buf = f.read(n)
    if len(buf) != n:
        raise CorruptPlan("plan file truncated")
    return buf


def _read_matrix(f, rows: int, cols: int) -> np.ndarray:
    if rows < 0 or cols < 0:
        raise CorruptPlan("negative dimension in plan header")
    body = _read_exact(f, rows * cols * 8)
    if f.read(1):
        raise CorruptPlan("trailing bytes after plan body")
    return np.frombuffer(body, dtype="<i8").reshape(rows, cols).astype(np.int64)


def load_plan(path):
    """Read a plan written by ``save_plan``, validating shape and bounds."""
    with open(path, "rb") as f:
        magic, version, code = struct.unpack("<4sBB", _read_exact(f, 6))
        if magic != _MAGIC:
            raise CorruptPlan("bad magic bytes")
        if version != _VERSION:
            raise CorruptPlan(f"unsupported plan version {version}")
        if code == _CODE_IID:
            r, n, seed = struct.unpack("<qqQ", _read_exact(f, 24))
            idx = _read_matrix(f, r, n)
            if r < 2 or n < 1 or idx.min() < 0 or idx.max() >= n:
                raise CorruptPlan("index out of range")
            return IidIndexPlan(idx, int(seed))
        if code == _CODE_BLOCK:
            n_points, block_len, tile_side, r, target, seed = struct.unpack(
                "<qqqqqQ", _read_exact(f, 48)
            )
            try:
                if tile_side > 0:
                    side = math.isqrt(n_points)
                    if side * side != n_points:
                        raise CorruptPlan("spatial plan with non-square point count")
                    bset = make_spatial_block_set(side, tile_side)
                else:
                    bset = make_block_set(n_points, block_len)
            except (InvalidBlockLength, InvalidTile) as e:
                raise CorruptPlan(str(e))
            if bset.block_len != block_len:
                raise CorruptPlan("inconsistent block length")
            counts = _read_matrix(f, r, bset.n_blocks)
            if r < 2 or counts.min() < 0:
                raise CorruptPlan("negative count")
            k = target // block_len if block_len > 0 else 0
            if block_len < 1 or target % block_len != 0 or np.any(counts.sum(axis=1) != k):
                raise CorruptPlan("count rows do not sum to blocks per resample")
            return BlockCountPlan(bset, counts, int(target), int(seed))
        if code == _CODE_POINT:
            r, n, target, seed = struct.unpack("<qqqQ", _read_exact(f, 32))
            counts = _read_matrix(f, r, n)
            if r < 2 or n < 1 or counts.min() < 0 or np.any(counts.sum(axis=1) != target):
                raise CorruptPlan("count rows do not sum to target size")
            return PointCountPlan(counts, int(target), int(seed))
        raise CorruptPlan(f"unknown plan type code {code}")
