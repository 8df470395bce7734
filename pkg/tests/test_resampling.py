"""Resampling plans: shapes, determinism, uniformity, exact counted sums."""

import math

import numpy as np
import pytest
from scipy.stats import chisquare

from bootsl.errors import (
    CorruptPlan,
    InsufficientResamples,
    InsufficientSamples,
    InvalidBlockLength,
    InvalidTile,
    UnsupportedStatistic,
)
from bootsl.resampling import (
    counts_from_indices,
    load_plan,
    make_blb_point_counts,
    make_block_plan,
    make_block_set,
    make_iid_plan,
    make_spatial_block_set,
    materialize_block_resample,
    resample_iid,
    save_plan,
    weighted_statistic,
)


# ---------------------------------------------------------------- iid plans


def test_iid_plan_shape_range_and_determinism():
    plan = make_iid_plan(100, 7, seed=42)
    assert plan.indices.shape == (7, 100)
    assert plan.indices.min() >= 0 and plan.indices.max() < 100
    again = make_iid_plan(100, 7, seed=42)
    np.testing.assert_array_equal(plan.indices, again.indices)
    other = make_iid_plan(100, 7, seed=43)
    assert not np.array_equal(plan.indices, other.indices)


def test_iid_plan_needs_two_resamples():
    with pytest.raises(InsufficientResamples):
        make_iid_plan(100, 1, seed=0)
    with pytest.raises(InsufficientSamples):
        make_iid_plan(1, 5, seed=0)


def test_iid_plan_draws_are_uniform():
    # Pooled counts over all rows against the flat multinomial, chi-square
    # at the 0.001 level.
    plan = make_iid_plan(200, 50, seed=7)
    counts = np.bincount(plan.indices.ravel(), minlength=200)
    assert chisquare(counts).pvalue > 0.001


# ---------------------------------------------------------------- block sets


def test_block_set_overlapping_runs():
    # Six points with blocks of two: five overlapping runs starting at
    # offsets 0 through 4.
    bset = make_block_set(6, 2)
    np.testing.assert_array_equal(bset.starts, np.arange(5))
    assert bset.n_blocks == 5 and bset.block_len == 2


def test_block_set_validation():
    with pytest.raises(InvalidBlockLength):
        make_block_set(10, 3)
    with pytest.raises(InvalidBlockLength):
        make_block_set(10, 0)
    with pytest.raises(InvalidBlockLength):
        make_block_set(10, 11)
    assert make_block_set(10, 10).n_blocks == 1


def test_spatial_block_set_offsets():
    bset = make_spatial_block_set(6, 3)
    assert bset.n_blocks == (6 - 3 + 1) ** 2
    assert bset.block_len == 9 and bset.tile_side == 3
    assert bset.n_points == 36


def test_spatial_block_set_validation():
    with pytest.raises(InvalidTile):
        make_spatial_block_set(10, 3)
    with pytest.raises(InvalidTile):
        make_spatial_block_set(4, 8)
    with pytest.raises(InvalidTile):
        make_spatial_block_set(4, 1)


# ---------------------------------------------------------------- count plans


def test_block_plan_rows_sum_to_blocks_per_resample():
    bset = make_block_set(32, 8)
    plan = make_block_plan(bset, 20, target_size=32, seed=5)
    assert plan.counts.shape == (20, bset.n_blocks)
    assert np.all(plan.counts.sum(axis=1) == 4)
    assert plan.blocks_per_resample == 4
    again = make_block_plan(bset, 20, target_size=32, seed=5)
    np.testing.assert_array_equal(plan.counts, again.counts)


def test_block_plan_target_must_be_multiple():
    bset = make_block_set(32, 8)
    with pytest.raises(InvalidBlockLength):
        make_block_plan(bset, 10, target_size=30, seed=0)


def test_block_plan_selection_is_uniform():
    bset = make_block_set(24, 2)
    plan = make_block_plan(bset, 400, target_size=24, seed=9)
    pooled = plan.counts.sum(axis=0)
    assert chisquare(pooled).pvalue > 0.001


def test_point_counts_rows_sum_to_target():
    plan = make_blb_point_counts(50, 30, target_size=1000, seed=3)
    assert plan.counts.shape == (30, 50)
    assert np.all(plan.counts.sum(axis=1) == 1000)
    pooled = plan.counts.sum(axis=0)
    assert chisquare(pooled).pvalue > 0.001
    with pytest.raises(InsufficientSamples):
        make_blb_point_counts(1, 10, 100, seed=0)


def test_counts_from_indices_matches_bincount():
    plan = make_iid_plan(40, 6, seed=11)
    cplan = counts_from_indices(plan)
    assert cplan.target_size == 40
    for r in range(6):
        np.testing.assert_array_equal(
            cplan.counts[r], np.bincount(plan.indices[r], minlength=40)
        )


# ---------------------------------------------------------------- materialise


def test_resample_iid_indexes_rows():
    data = np.arange(10.0) * 1.5
    plan = make_iid_plan(10, 3, seed=2)
    got = resample_iid(data, plan, 1)
    np.testing.assert_array_equal(got, data[plan.indices[1]])


def test_resample_iid_bounds_check():
    plan = make_iid_plan(10, 3, seed=2)
    with pytest.raises(CorruptPlan):
        resample_iid(np.arange(5.0), plan, 0)


def test_block_materialisation_catalogue_order():
    # Counts [2, 0, 1, 0, 0] over blocks of 2 in 6 points: block 0 twice
    # then block 2 once.
    bset = make_block_set(6, 2)
    plan = make_block_plan(bset, 2, target_size=6, seed=1)
    forced = plan.counts.copy()
    forced[0] = [2, 0, 1, 0, 0]
    plan = type(plan)(bset, forced, plan.target_size, plan.seed)
    data = np.array([10.0, 11.0, 12.0, 13.0, 14.0, 15.0])
    got = materialize_block_resample(data, plan, 0)
    np.testing.assert_array_equal(got, [10.0, 11.0, 10.0, 11.0, 12.0, 13.0])


def test_block_materialisation_length_and_membership():
    rng = np.random.default_rng(8)
    data = rng.normal(size=32)
    bset = make_block_set(32, 8)
    plan = make_block_plan(bset, 5, target_size=32, seed=4)
    for r in range(5):
        res = materialize_block_resample(data, plan, r)
        assert res.size == 32
        assert np.all(np.isin(res, data))


def test_block_materialisation_rejects_spatial_and_mismatch():
    sset = make_spatial_block_set(6, 3)
    plan = make_block_plan(sset, 3, target_size=36, seed=0)
    with pytest.raises(CorruptPlan):
        materialize_block_resample(np.zeros(36), plan, 0)
    bset = make_block_set(6, 2)
    bplan = make_block_plan(bset, 3, target_size=6, seed=0)
    with pytest.raises(CorruptPlan):
        materialize_block_resample(np.zeros(7), bplan, 0)


# ---------------------------------------------------------------- counted stats


def _expanded(values, counts):
    return [v for v, c in zip(values, counts) for _ in range(int(c))]


def test_weighted_statistic_bitwise_equals_expansion():
    # Oracle: fsum over the explicitly materialised multiset.  Both routes
    # are correctly rounded, so equality is exact.
    rng = np.random.default_rng(17)
    for _ in range(200):
        n = int(rng.integers(2, 40))
        scale = 10.0 ** rng.integers(-8, 9)
        values = rng.normal(size=n) * scale
        counts = rng.integers(0, 20, size=n)
        if counts.sum() < 2:
            counts[0] += 2
        exp = _expanded(values, counts)
        want_mean = math.fsum(exp) / len(exp)
        assert weighted_statistic(values, counts, "mean") == want_mean
        want_var = math.fsum((e - want_mean) ** 2 for e in exp) / (len(exp) - 1)
        assert weighted_statistic(values, counts, "variance") == want_var
        assert weighted_statistic(values, counts, "sd") == math.sqrt(want_var)


def test_weighted_statistic_expansion_order_invariant():
    rng = np.random.default_rng(18)
    values = rng.normal(size=25) * 1e6
    counts = rng.integers(0, 10, size=25)
    counts[0] += 2
    exp = np.array(_expanded(values, counts))
    shuffled = exp[rng.permutation(exp.size)]
    assert weighted_statistic(values, counts, "mean") == math.fsum(shuffled) / exp.size


def test_weighted_statistic_agrees_with_numpy():
    rng = np.random.default_rng(19)
    values = rng.normal(size=30)
    counts = rng.integers(1, 8, size=30)
    exp = np.repeat(values, counts)
    assert weighted_statistic(values, counts, "mean") == pytest.approx(exp.mean(), rel=1e-12)
    assert weighted_statistic(values, counts, "sd") == pytest.approx(
        exp.std(ddof=1), rel=1e-12
    )


def test_weighted_statistic_validation():
    with pytest.raises(UnsupportedStatistic):
        weighted_statistic(np.ones(3), np.ones(3, dtype=int), "median")
    with pytest.raises(ValueError):
        weighted_statistic(np.ones(3), np.ones(4, dtype=int))
    with pytest.raises(ValueError):
        weighted_statistic(np.ones(3), np.array([1, -1, 1]))
    with pytest.raises(InsufficientSamples):
        weighted_statistic(np.ones(3), np.zeros(3, dtype=int), "mean")
    with pytest.raises(InsufficientSamples):
        weighted_statistic(np.ones(3), np.array([1, 0, 0]), "variance")


# ---------------------------------------------------------------- plan files


def test_plan_round_trips(tmp_path):
    plans = [
        make_iid_plan(30, 4, seed=101),
        make_block_plan(make_block_set(24, 4), 3, target_size=24, seed=102),
        make_block_plan(make_spatial_block_set(8, 4), 3, target_size=64, seed=103),
        make_blb_point_counts(20, 5, target_size=500, seed=104),
    ]
    for i, plan in enumerate(plans):
        path = tmp_path / f"plan{i}.bin"
        save_plan(path, plan)
        loaded = load_plan(path)
        assert type(loaded) is type(plan)
        assert loaded.seed == plan.seed
        if hasattr(plan, "indices"):
            np.testing.assert_array_equal(loaded.indices, plan.indices)
        else:
            np.testing.assert_array_equal(loaded.counts, plan.counts)
        if hasattr(plan, "block_set"):
            assert loaded.block_set.tile_side == plan.block_set.tile_side
            np.testing.assert_array_equal(loaded.block_set.starts, plan.block_set.starts)


def test_plan_file_corruption_detected(tmp_path):
    path = tmp_path / "plan.bin"
    plan = make_iid_plan(10, 3, seed=5)
    save_plan(path, plan)
    raw = path.read_bytes()

    (tmp_path / "trunc.bin").write_bytes(raw[:-4])
    with pytest.raises(CorruptPlan):
        load_plan(tmp_path / "trunc.bin")

    (tmp_path / "magic.bin").write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(CorruptPlan):
        load_plan(tmp_path / "magic.bin")

    (tmp_path / "trail.bin").write_bytes(raw + b"\x00")
    with pytest.raises(CorruptPlan):
        load_plan(tmp_path / "trail.bin")

    # Flip one stored index out of range.
    tampered = bytearray(raw)
    tampered[-8:] = (10**6).to_bytes(8, "little")
    (tmp_path / "range.bin").write_bytes(bytes(tampered))
    with pytest.raises(CorruptPlan):
        load_plan(tmp_path / "range.bin")


def test_plan_file_count_sum_checked(tmp_path):
    path = tmp_path / "pc.bin"
    plan = make_blb_point_counts(6, 3, target_size=50, seed=5)
    save_plan(path, plan)
    raw = bytearray(path.read_bytes())
    raw[-8:] = (10**3).to_bytes(8, "little")
    path.write_bytes(bytes(raw))
    with pytest.raises(CorruptPlan):
        load_plan(path)
