"""Experiment runners behind the CLI subcommands.

Every runner takes a resolved :class:`ExperimentConfig`, derives all of its
randomness from the config seed, writes delimited tables plus a manifest
into the output directory, and returns the paths it wrote.  Rerunning from
the manifest reproduces every output byte for byte.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, validate_config
from .diagnostics import ess_weights, iat, kde, replicate_metrics
from .errors import ConfigError, DegenerateBandwidth, InsufficientSamples
from .estimators import (
    EstimatorConfig,
    IsingModel,
    LvModel,
    ToyModel,
    abc_loglik,
    babc_loglik,
    blbsl_loglik,
    bsl_loglik,
    bsl_sigma,
    blbsl_sigma,
    sl_loglik,
)
from .regression import MuStore
from .resampling import (
    make_blb_point_counts,
    make_block_plan,
    make_block_set,
    make_iid_plan,
    make_spatial_block_set,
)
from .rng import spawn_seed, substream
from .samplers import exchange_chain, make_schedule, mh_chain, smc_blbsl
from .simulators import gillespie_lv, ising_gibbs, simulate_gaussian_iid
from .stats import summarize_ising, summarize_lv
from .tableio import read_table, write_manifest, write_table

LV_LOG_LO, LV_LOG_HI = -6.0, 2.0


# ------------------------------------------------------------- observed data


def _observed_toy(cfg: ExperimentConfig):
    d = cfg.data
    y = simulate_gaussian_iid(d["n_points"], d["tau"], substream(cfg.seed, "data"))
    model = ToyModel(d["n_points"])
    return model, model.summarize(y), y


def _observed_lv(cfg: ExperimentConfig):
    d = cfg.data
    path = gillespie_lv(
        np.asarray(d["theta_true"], dtype=float),
        spawn_seed(cfg.seed, "data"),
        n_obs=d["n_obs"],
        dt=d["dt"],
        x0=d["x0"],
        y0=d["y0"],
    )
    if path.diverged:
        raise RuntimeError("observed series hit a simulation cap; change the data seed")
    # The chain works with statistics scaled by the observed ones, so the
    # observed statistic itself is a vector of ones.
    t_obs = summarize_lv(path.x, path.y)
    model = LvModel(t_obs=t_obs, n_obs=d["n_obs"], dt=d["dt"], x0=d["x0"], y0=d["y0"])
    return model, model.summarize(path), path


def _observed_ising(cfg: ExperimentConfig):
    d = cfg.data
    grid = ising_gibbs(
        d["side"], d["theta_true"], substream(cfg.seed, "data"),
        sweeps=d["equilibration_sweeps"],
    )
    s_obs = np.array([summarize_ising(grid)])
    sub_side = math.isqrt(max(cfg.estimator["n"], 1))
    model = IsingModel(
        side=sub_side if cfg.estimator["kind"] == "BLB-SL" else d["side"],
        sweeps=cfg.sampler["gibbs_sweeps"],
        obs_side=d["side"] if cfg.estimator["kind"] == "BLB-SL" else 0,
    )
    return model, s_obs, grid


def build_observed(cfg: ExperimentConfig):
    if cfg.experiment in ("toy", "custom"):
        return _observed_toy(cfg)
    if cfg.experiment == "lv":
        return _observed_lv(cfg)
    return _observed_ising(cfg)


# ----------------------------------------------------- estimator closures


def make_plan(cfg: ExperimentConfig, espec: dict, seed_label: str = "plan"):
    """Resampling plan for one estimator spec, or None for plan-free kinds."""
    kind = espec["kind"]
    seed = spawn_seed(cfg.seed, seed_label)
    if cfg.experiment in ("toy", "custom"):
        if kind == "BLB-SL":
            return make_blb_point_counts(espec["n"], espec["r"], cfg.data["n_points"], seed)
        if kind in ("B-SL", "B-ABC"):
            return make_iid_plan(cfg.data["n_points"], espec["r"], seed)
    elif cfg.experiment == "lv":
        if kind in ("B-SL", "BLB-SL", "B-ABC"):
            bset = make_block_set(cfg.data["n_obs"], espec["block_len"])
            return make_block_plan(bset, espec["r"], cfg.data["n_obs"], seed)
    else:
        if kind == "BLB-SL":
            sub_side = math.isqrt(espec["n"])
            bset = make_spatial_block_set(sub_side, espec["tile_side"])
            return make_block_plan(bset, espec["r"], cfg.data["side"] ** 2, seed)
    return None


def _mu_scale(cfg: ExperimentConfig, espec: dict) -> float:
    if cfg.experiment == "ising" and espec["kind"] == "BLB-SL":
        sub_side = math.isqrt(espec["n"])
        return (cfg.data["side"] / sub_side) ** 2
    return 1.0


def make_loglik(cfg: ExperimentConfig, espec: dict, model, s_obs, plan, rng):
    """Closure theta -> estimated log-likelihood with its own stream."""
    ecfg = EstimatorConfig(
        kind=espec["kind"], m=espec["m"], r=espec["r"], epsilon=espec["epsilon"],
        n=espec["n"], block_len=espec["block_len"], mu_mode=espec["mu_mode"],
    )
    kind = ecfg.kind
    if kind == "SL":
        return lambda th: sl_loglik(th, s_obs, model, ecfg, rng)
    if kind == "B-SL":
        return lambda th: bsl_loglik(th, s_obs, model, ecfg, plan, rng)
    if kind == "BLB-SL":
        scale = _mu_scale(cfg, espec)
        return lambda th: blbsl_loglik(th, s_obs, model, ecfg, plan, rng, mu_scale=scale)
    if kind == "ABC":
        return lambda th: abc_loglik(th, s_obs, model, ecfg, rng)
    return lambda th: babc_loglik(th, s_obs, model, ecfg, plan, rng)


def make_log_prior(experiment: str):
    if experiment in ("toy", "custom"):
        # Gamma(1, 1) on the precision.
        return lambda th: -float(th[0]) if th[0] > 0.0 else -np.inf

    if experiment == "lv":

        def lv_prior(th):
            th = np.asarray(th, dtype=float)
            if np.any(th <= 0.0):
                return -np.inf
            logs = np.log(th)
            if np.any(logs < LV_LOG_LO) or np.any(logs > LV_LOG_HI):
                return -np.inf
            # Uniform in the log domain: density 1/theta_i on the natural scale.
            return -float(logs.sum())

        return lv_prior

    return lambda th: 0.0 if 0.0 <= th[0] <= 1.0 else -np.inf


def make_prior_sampler(experiment: str):
    if experiment in ("toy", "custom"):
        return lambda g: g.gamma(1.0, 1.0)
    if experiment == "lv":
        return lambda g: np.exp(g.uniform(LV_LOG_LO, LV_LOG_HI, size=3))
    return lambda g: g.random()


# ------------------------------------------------------------- table helpers


def _chain_metrics(thetas: np.ndarray, burn: int):
    kept = thetas[burn:]
    rows = []
    for j in range(kept.shape[1]):
        col = kept[:, j]
        try:
            tau_int = iat(col)
        except InsufficientSamples:
            tau_int = math.nan
        q = np.quantile(col, [0.5, 0.025, 0.975])
        rows.append([j, col.mean(), col.std(ddof=1), q[0], q[1], q[2], tau_int])
    return np.array(rows), kept


METRIC_HEADER = ["param", "mean", "sd", "median", "q025", "q975", "iat"]


def _write_kdes(out: Path, kept: np.ndarray, prefix: str, weights=None):
    paths = []
    for j in range(kept.shape[1]):
        col = kept[:, j]
        lo, hi = float(col.min()), float(col.max())
        span = (hi - lo) or max(abs(lo), 1.0)
        grid = np.linspace(lo - 0.05 * span, hi + 0.05 * span, 256)
        try:
            dens = kde(col, grid, weights=weights)
        except (InsufficientSamples, DegenerateBandwidth):
            dens = np.zeros_like(grid)
        path = out / f"{prefix}kde_theta_{j}.csv"
        write_table(path, ["grid", "density"], np.column_stack([grid, dens]))
        paths.append(path)
    return paths


def _finish(out: Path, command: str, cfg: ExperimentConfig, paths):
    manifest = out / "manifest.json"
    write_manifest(manifest, command, cfg.as_dict())
    return [str(p) for p in list(paths) + [manifest]]


# ---------------------------------------------------------------- commands


def run_simulate(cfg: ExperimentConfig):
    out = Path(cfg.out)
    model, s_obs, raw = build_observed(cfg)
    path = out / "data.csv"
    if cfg.experiment in ("toy", "custom"):
        write_table(path, ["y"], np.asarray(raw)[:, None])
    elif cfg.experiment == "lv":
        write_table(
            path,
            ["t", "x", "y"],
            np.column_stack([raw.times, raw.x, raw.y]),
        )
    else:
        write_table(path, [f"s_{j}" for j in range(raw.shape[1])], raw)
    stat_path = out / "s_obs.csv"
    write_table(stat_path, [f"stat_{j}" for j in range(s_obs.size)], s_obs[None, :])
    return _finish(out, "simulate", cfg, [path, stat_path])


def run_estimate(cfg: ExperimentConfig):
    """One likelihood evaluation at theta0, plus the covariance estimate for
    the bootstrap kinds; replicate this command for variance studies."""
    out = Path(cfg.out)
    model, s_obs, _ = build_observed(cfg)
    espec = cfg.estimator
    plan = make_plan(cfg, espec)
    rng = substream(cfg.seed, "estimator")
    theta0 = np.asarray(cfg.sampler["theta0"], dtype=float)
    loglik = make_loglik(cfg, espec, model, s_obs, plan, rng)
    value = loglik(theta0)
    paths = [out / "estimate.csv"]
    write_table(paths[0], ["loglik"], np.array([[value]]))
    if espec["kind"] in ("B-SL", "BLB-SL"):
        ecfg = cfg.estimator_config()
        sig_rng = substream(cfg.seed, "sigma")
        sigma_fn = bsl_sigma if espec["kind"] == "B-SL" else blbsl_sigma
        sigma = sigma_fn(theta0, model, ecfg, plan, sig_rng)
        paths.append(out / "sigma.csv")
        write_table(paths[1], [f"s_{j}" for j in range(sigma.shape[1])], sigma)
    return _finish(out, "estimate", cfg, paths)


def _mcmc_single(cfg: ExperimentConfig, espec: dict, chain_label, model, s_obs):
    plan = make_plan(cfg, espec, seed_label="plan")
    est_rng = substream(cfg.seed, "estimator", *chain_label)
    chain_rng = substream(cfg.seed, "chain", *chain_label)
    loglik = make_loglik(cfg, espec, model, s_obs, plan, est_rng)
    s = cfg.sampler
    return mh_chain(
        np.asarray(s["theta0"], dtype=float),
        np.asarray(s["proposal_sd"], dtype=float),
        s["n_iter"],
        loglik,
        make_log_prior(cfg.experiment),
        chain_rng,
    )


def run_mcmc(cfg: ExperimentConfig, prefix: str = "", observed=None):
    out = Path(cfg.out)
    model, s_obs, _ = observed if observed is not None else build_observed(cfg)
    res = _mcmc_single(cfg, cfg.estimator, (prefix,), model, s_obs)
    burn = cfg.sampler["n_iter"] // 10
    chain_path = out / f"{prefix}chain.csv"
    dim = res.thetas.shape[1]
    write_table(
        chain_path,
        [f"theta_{j}" for j in range(dim)] + ["loglik"],
        np.column_stack([res.thetas, res.logliks]),
    )
    metrics, kept = _chain_metrics(res.thetas, burn)
    metrics_path = out / f"{prefix}metrics.csv"
    write_table(metrics_path, METRIC_HEADER, metrics)
    info_path = out / f"{prefix}run_info.csv"
    write_table(
        info_path,
        ["n_iter", "burn_in", "n_accept", "n_degenerate", "acceptance_rate"],
        np.array([[cfg.sampler["n_iter"], burn, res.n_accept, res.n_degenerate,
                   res.acceptance_rate]]),
    )
    kde_paths = _write_kdes(out, kept, prefix)
    return _finish(out, "mcmc", cfg, [chain_path, metrics_path, info_path] + kde_paths)


def run_exchange(cfg: ExperimentConfig, prefix: str = ""):
    if cfg.experiment != "ising":
        raise ConfigError([("experiment", "the exchange chain applies to the ising experiment")])
    out = Path(cfg.out)
    _, _, grid = build_observed(cfg)
    s = cfg.sampler
    res = exchange_chain(
        float(s["theta0"][0]),
        float(s["proposal_sd"][0]),
        s["n_iter"],
        grid,
        substream(cfg.seed, "exchange", prefix),
        sweeps=s["gibbs_sweeps"],
    )
    burn = s["n_iter"] // 10
    chain_path = out / f"{prefix}exchange_chain.csv"
    write_table(chain_path, ["theta_0"], res.thetas[:, None])
    metrics, kept = _chain_metrics(res.thetas[:, None], burn)
    metrics_path = out / f"{prefix}exchange_metrics.csv"
    write_table(metrics_path, METRIC_HEADER, metrics)
    kde_paths = _write_kdes(out, kept, prefix + "exchange_")
    return _finish(out, "exchange", cfg, [chain_path, metrics_path] + kde_paths)


def run_smc(cfg: ExperimentConfig, prefix: str = ""):
    out = Path(cfg.out)
    model, s_obs, _ = build_observed(cfg)
    espec = cfg.estimator
    plan = make_plan(cfg, espec)
    if plan is None:
        raise ConfigError(
            [("estimator.kind", "the sequential sampler needs a resampling estimator")]
        )
    s = cfg.sampler
    store = MuStore(len(s["theta0"]), s_obs.size)
    clouds = smc_blbsl(
        s["p_particles"],
        make_schedule(s["t_targets"]),
        make_prior_sampler(cfg.experiment),
        make_log_prior(cfg.experiment),
        model,
        cfg.estimator_config(),
        plan,
        s_obs,
        s["l_neighbors"],
        substream(cfg.seed, "smc", prefix),
        mu_scale=_mu_scale(cfg, espec),
        store=store,
    )
    final = clouds[-1]
    dim = final.particles.shape[1]
    cloud_path = out / f"{prefix}cloud_final.csv"
    write_table(
        cloud_path,
        [f"theta_{j}" for j in range(dim)] + ["weight", "loglik"],
        np.column_stack([final.particles, final.weights, final.logliks]),
    )
    ess_path = out / f"{prefix}ess_trace.csv"
    write_table(
        ess_path,
        ["target", "ess"],
        np.array([[c.generation, c.ess] for c in clouds]),
    )
    store_path = out / f"{prefix}store.csv"
    store.dump(store_path)
    kde_paths = _write_kdes(out, final.particles, prefix + "smc_", weights=final.weights)
    return _finish(out, "smc", cfg, [cloud_path, ess_path, store_path] + kde_paths)


# ------------------------------------------------------------- replication


def _replicate_seed_config(cfg: ExperimentConfig, rep: int) -> ExperimentConfig:
    doc = cfg.as_dict()
    doc["seed"] = int(spawn_seed(cfg.seed, "replicate", rep))
    # Observed data is shared across replicates: it comes from the master
    # seed, so it stays in the parent and is passed through.
    return validate_config(doc)


def _replicate_worker(payload):
    doc, rep = payload
    cfg = validate_config(doc)
    rep_cfg = _replicate_seed_config(cfg, rep)
    model, s_obs, _ = build_observed(cfg)
    res = _mcmc_single(rep_cfg, rep_cfg.estimator, (), model, s_obs)
    out = Path(cfg.out)
    burn = cfg.sampler["n_iter"] // 10
    chain_path = out / f"rep_{rep:03d}_chain.csv"
    dim = res.thetas.shape[1]
    write_table(
        chain_path,
        [f"theta_{j}" for j in range(dim)] + ["loglik"],
        np.column_stack([res.thetas, res.logliks]),
    )
    kept = res.thetas[burn:]
    return rep, kept.mean(axis=0), kept.std(axis=0, ddof=1), str(chain_path)


def _true_theta(cfg: ExperimentConfig) -> np.ndarray:
    if cfg.experiment in ("toy", "custom"):
        return np.array([cfg.data["tau"]])
    if cfg.experiment == "lv":
        return np.asarray(cfg.data["theta_true"], dtype=float)
    return np.array([cfg.data["theta_true"]])


def run_replicate(cfg: ExperimentConfig, jobs: int = 1):
    """Replicate chains on shared observed data, each with a derived seed,
    plus a bias/sd/RMSE report of the posterior means against the truth."""
    if cfg.replicates < 2:
        raise ConfigError([("replicates", "a replicate study needs at least 2")])
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    payloads = [(cfg.as_dict(), r) for r in range(cfg.replicates)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_replicate_worker, payloads))
    else:
        results = [_replicate_worker(p) for p in payloads]
    results.sort(key=lambda t: t[0])
    means = np.stack([r[1] for r in results])
    sds = np.stack([r[2] for r in results])
    paths = [r[3] for r in results]

    truth = _true_theta(cfg)
    rows = []
    for j in range(means.shape[1]):
        rep = replicate_metrics(means[:, j], float(truth[j]) if j < truth.size else 0.0)
        rows.append([j, rep.bias, rep.sd, rep.rmse, sds[:, j].mean(), rep.n_replicates])
    report_path = out / "report.csv"
    write_table(
        report_path,
        ["param", "bias", "sd", "rmse", "mean_posterior_sd", "n_replicates"],
        np.array(rows),
    )
    means_path = out / "replicate_means.csv"
    write_table(
        means_path,
        [f"mean_{j}" for j in range(means.shape[1])]
        + [f"sd_{j}" for j in range(sds.shape[1])],
        np.column_stack([means, sds]),
    )
    return _finish(out, "replicate", cfg, paths + [report_path, means_path])


DEFAULT_STUDY = {
    "toy": [
        {"kind": "SL", "m": 50},
        {"kind": "B-SL", "m": 2, "r": 100},
    ],
    "custom": [
        {"kind": "SL", "m": 50},
        {"kind": "B-SL", "m": 2, "r": 100},
    ],
    "lv": [
        {"kind": "SL", "m": 2},
        {"kind": "B-SL", "m": 2, "r": 100, "block_len": 8},
    ],
    "ising": [],
}


def run_experiment(cfg: ExperimentConfig, jobs: int = 1):
    """Preset study for the experiment kind: replicated chains per estimator
    (toy and the predator-prey series) or the sequential sampler against the
    exchange chain (the lattice), all under one output directory."""
    out = Path(cfg.out)
    written = []
    if cfg.experiment == "ising":
        written += run_exchange(cfg)
        written += run_smc(cfg)
        return _finish(out, "experiment", cfg, written)

    especs = cfg.estimators or [
        validate_config({"experiment": cfg.experiment, "estimator": e}).estimator
        for e in DEFAULT_STUDY[cfg.experiment]
    ]
    summary_rows = []
    for i, espec in enumerate(especs):
        sub_doc = cfg.as_dict()
        sub_doc["estimator"] = espec
        sub_doc["estimators"] = []
        sub_doc["out"] = str(out / f"est_{i}_{espec['kind'].lower().replace('-', '')}")
        sub_doc["seed"] = int(spawn_seed(cfg.seed, "study", i))
        sub = validate_config(sub_doc)
        written += run_replicate(sub, jobs=jobs)
        _, report = read_table(Path(sub.out) / "report.csv")
        for row in report:
            summary_rows.append([i] + list(row))
        # KDE files come from the first replicate's chain of each estimator.
        _, rep_chain = read_table(Path(sub.out) / "rep_000_chain.csv")
        burn = sub.sampler["n_iter"] // 10
        written += [str(p) for p in _write_kdes(
            Path(sub.out), rep_chain[burn:, :-1], ""
        )]
    summary_path = out / "metrics.csv"
    write_table(
        summary_path,
        ["estimator", "param", "bias", "sd", "rmse", "mean_posterior_sd", "n_replicates"],
        np.array(summary_rows),
    )
    written.append(str(summary_path))
    return _finish(out, "experiment", cfg, written)
