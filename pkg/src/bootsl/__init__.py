"""Simulation-based likelihood estimation with resampled covariance
estimates, subsampled virtual resamples, kernel alternatives, and the
samplers and diagnostics to use them."""

from .config import ExperimentConfig, PRESETS, apply_scale, validate_config
from .diagnostics import ReplicateReport, ess_weights, iat, kde, replicate_metrics
from .errors import (
    BootslError,
    ConfigError,
    CorruptPlan,
    DegenerateBandwidth,
    DegenerateSeries,
    DegenerateWeights,
    EmptyInput,
    InsufficientHistory,
    InsufficientResamples,
    InsufficientSamples,
    InvalidBlockLength,
    InvalidPrecision,
    InvalidScaling,
    InvalidSpin,
    InvalidTile,
    NonInvertibleCovariance,
    NormalizationError,
    UnsupportedCombination,
    UnsupportedStatistic,
)
from .estimators import (
    EstimatorConfig,
    IsingModel,
    LvModel,
    ToyModel,
    abc_loglik,
    babc_loglik,
    blbsl_loglik,
    blbsl_sigma,
    bsl_loglik,
    bsl_sigma,
    estimate_mu_raw,
    sl_loglik,
)
from .regression import MuStore, local_linear_predict
from .resampling import (
    BlockCountPlan,
    BlockSet,
    IidIndexPlan,
    PointCountPlan,
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
from .rng import spawn_seed, substream
from .samplers import (
    AnnealSchedule,
    ChainResult,
    ExchangeResult,
    ParticleCloud,
    exchange_chain,
    make_schedule,
    mh_chain,
    smc_blbsl,
    systematic_resample,
)
from .simulators import (
    LvPath,
    gillespie_lv,
    ising_gibbs,
    ising_unnorm_logdensity,
    simulate_gaussian_iid,
)
from .stats import (
    BlockStatistic,
    SyntheticGaussian,
    combine_block_statistics,
    gaussian_log_density,
    ising_tile_pair_sums,
    ising_tile_rescale,
    repair_psd,
    sample_covariance,
    sample_mean,
    summarize_ising,
    summarize_iid,
    summarize_lv,
)

__version__ = "0.1.0"
