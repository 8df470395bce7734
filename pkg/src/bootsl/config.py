"""Experiment configuration: presets, merging, and validation.

A config is a nested key-value document (JSON on disk).  Each experiment
kind has a complete preset; a user config overrides preset keys and every
violation of the cross-field rules is reported with its path, so a bad
file fails with the full list rather than the first problem.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field

from .errors import ConfigError
from .estimators import EstimatorConfig, KINDS, MU_MODES

KERNEL_KINDS = ("ABC", "B-ABC")

# Default kernel bandwidth per experiment, applied only when the chosen
# estimator is a kernel kind and no bandwidth was given.
DEFAULT_EPSILON = {"toy": 0.001, "custom": 0.001, "lv": 0.1, "ising": 0.1}

PRESETS = {
    "toy": {
        "experiment": "toy",
        "seed": 1,
        "out": "runs/toy",
        "replicates": 40,
        "data": {"n_points": 100000, "tau": 0.25},
        "estimator": {
            "kind": "SL",
            "m": 50,
            "r": 100,
            "epsilon": 0.0,
            "n": 0,
            "block_len": 0,
            "tile_side": 0,
            "mu_mode": "estimated",
        },
        "estimators": [],
        "sampler": {
            "n_iter": 20000,
            "theta0": [0.25],
            "proposal_sd": [0.002],
            "p_particles": 200,
            "t_targets": 10,
            "l_neighbors": 100,
            "gibbs_sweeps": 10,
        },
    },
    "lv": {
        "experiment": "lv",
        "seed": 2,
        "out": "runs/lv",
        "replicates": 2,
        "data": {
            "n_obs": 32,
            "dt": 2.0,
            "x0": 50,
            "y0": 100,
            "theta_true": [1.0, 0.005, 0.6],
        },
        "estimator": {
            "kind": "B-SL",
            "m": 2,
            "r": 100,
            "epsilon": 0.0,
            "n": 0,
            "block_len": 8,
            "tile_side": 0,
            "mu_mode": "estimated",
        },
        "estimators": [],
        "sampler": {
            "n_iter": 5000,
            "theta0": [1.0, 0.005, 0.6],
            "proposal_sd": [0.2, 0.001, 0.2],
            "p_particles": 200,
            "t_targets": 10,
            "l_neighbors": 100,
            "gibbs_sweeps": 10,
        },
    },
    "ising": {
        "experiment": "ising",
        "seed": 3,
        "out": "runs/ising",
        "replicates": 2,
        "data": {"side": 100, "theta_true": 0.3, "equilibration_sweeps": 200},
        "estimator": {
            "kind": "BLB-SL",
            "m": 1,
            "r": 100,
            "epsilon": 0.0,
            "n": 2500,
            "block_len": 0,
            "tile_side": 25,
            "mu_mode": "regression",
        },
        "estimators": [],
        "sampler": {
            "n_iter": 1000,
            "theta0": [0.298],
            "proposal_sd": [0.001],
            "p_particles": 200,
            "t_targets": 10,
            "l_neighbors": 100,
            "gibbs_sweeps": 10,
        },
    },
}
# A custom experiment is toy-shaped: Gaussian data with user-chosen sizes.
PRESETS["custom"] = copy.deepcopy(PRESETS["toy"])
PRESETS["custom"]["experiment"] = "custom"
PRESETS["custom"]["out"] = "runs/custom"

THETA_DIM = {"toy": 1, "custom": 1, "lv": 3, "ising": 1}


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved experiment description."""

    experiment: str
    seed: int
    out: str
    replicates: int
    data: dict
    estimator: dict
    estimators: list
    sampler: dict

    def estimator_config(self, spec: dict | None = None) -> EstimatorConfig:
        e = self.estimator if spec is None else spec
        return EstimatorConfig(
            kind=e["kind"],
            m=e["m"],
            r=e["r"],
            epsilon=e["epsilon"],
            n=e["n"],
            block_len=e["block_len"],
            mu_mode=e["mu_mode"],
        )

    def as_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "seed": self.seed,
            "out": self.out,
            "replicates": self.replicates,
            "data": copy.deepcopy(self.data),
            "estimator": copy.deepcopy(self.estimator),
            "estimators": copy.deepcopy(self.estimators),
            "sampler": copy.deepcopy(self.sampler),
        }


def _merge(preset: dict, user: dict, path: str, problems: list) -> dict:
    out = copy.deepcopy(preset)
    for key, value in user.items():
        here = f"{path}.{key}" if path else key
        if key not in preset:
            problems.append((here, "unknown key"))
            continue
        if isinstance(preset[key], dict):
            if not isinstance(value, dict):
                problems.append((here, "expected a section"))
            else:
                out[key] = _merge(preset[key], value, here, problems)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _check_int(cfg, path, problems, lo):
    section, _, name = path.rpartition(".")
    container = cfg[section] if section else cfg
    v = container.get(name)
    if not isinstance(v, int) or isinstance(v, bool) or v < lo:
        problems.append((path, f"must be an integer >= {lo}"))
        return False
    return True


def _check_num(cfg, path, problems, lo, strict=True):
    section, _, name = path.rpartition(".")
    v = cfg[section].get(name)
    ok = isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)
    if not ok or (strict and not v > lo) or (not strict and v < lo):
        cmp = ">" if strict else ">="
        problems.append((path, f"must be a finite number {cmp} {lo}"))
        return False
    return True


def _validate_estimator(e: dict, kind: str, experiment: str, path: str, problems: list):
    if e.get("kind") not in KINDS:
        problems.append((f"{path}.kind", f"must be one of {KINDS}"))
        return
    if e.get("mu_mode") not in MU_MODES:
        problems.append((f"{path}.mu_mode", f"must be one of {MU_MODES}"))
        return
    ek = e["kind"]
    for name, lo in (("m", 1), ("r", 0), ("n", 0), ("block_len", 0), ("tile_side", 0)):
        v = e.get(name)
        if not isinstance(v, int) or isinstance(v, bool) or v < lo:
            problems.append((f"{path}.{name}", f"must be an integer >= {lo}"))
            return
    if ek == "SL" and e["m"] < 2:
        problems.append((f"{path}.m", "SL needs at least 2 simulations"))
    if ek in ("B-SL", "BLB-SL") and e["r"] < 2:
        problems.append((f"{path}.r", "bootstrap estimators need at least 2 resamples"))
    if ek == "B-ABC" and e["r"] < 1:
        problems.append((f"{path}.r", "resampled kernel estimator needs at least 1 resample"))
    eps = e.get("epsilon")
    if not isinstance(eps, (int, float)) or isinstance(eps, bool) or not math.isfinite(eps):
        problems.append((f"{path}.epsilon", "must be a finite number"))
        return
    if ek in KERNEL_KINDS:
        if eps == 0.0:
            e["epsilon"] = DEFAULT_EPSILON[experiment]
        elif eps < 0.0:
            problems.append((f"{path}.epsilon", "bandwidth must be positive"))
    elif eps != 0.0:
        problems.append((f"{path}.epsilon", "only kernel estimators take a bandwidth"))


def _validate_cross(cfg: dict, e: dict, path: str, problems: list):
    kind = cfg["experiment"]
    ek = e.get("kind")
    if ek not in KINDS:
        return
    if kind in ("toy", "custom"):
        if ek == "BLB-SL":
            n_points = cfg["data"].get("n_points", 0)
            if not 2 <= e["n"] <= n_points:
                problems.append(
                    (f"{path}.n", f"subsample size must lie in [2, data.n_points={n_points}]")
                )
    elif kind == "lv":
        if ek in ("B-SL", "BLB-SL", "B-ABC"):
            n_obs = cfg["data"].get("n_obs", 0)
            b = e["block_len"]
            if b < 1 or (isinstance(n_obs, int) and n_obs >= 1 and n_obs % b != 0):
                problems.append(
                    (
                        f"{path}.block_len",
                        f"block length {b} must divide data.n_obs={n_obs}",
                    )
                )
    elif kind == "ising":
        if ek == "BLB-SL":
            n = e["n"]
            sub_side = math.isqrt(max(n, 0))
            ts = e["tile_side"]
            side = cfg["data"].get("side", 0)
            if sub_side * sub_side != n or sub_side < 2:
                problems.append((f"{path}.n", "subsample site count must be a square"))
            elif ts < 2 or sub_side % ts != 0:
                problems.append(
                    (f"{path}.tile_side", f"tile side {ts} must divide the subgrid side {sub_side}")
                )
            elif isinstance(side, int) and side >= 2 and side % ts != 0:
                problems.append(
                    (f"{path}.tile_side", f"tile side {ts} must divide data.side={side}")
                )


def validate_config(raw) -> ExperimentConfig:
    """Merge a raw config over its experiment preset and check every rule.

    ``raw`` may be a dict or JSON text.  Raises ConfigError carrying the
    complete list of (path, reason) violations.
    """
    if isinstance(raw, (str, bytes)):
        try:
            raw = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ConfigError([("<document>", f"not valid JSON: {exc}")])
    if not isinstance(raw, dict):
        raise ConfigError([("<document>", "top level must be a mapping")])
    # Manifests embed the config under "config"; accept them directly.
    if "config" in raw and "command" in raw:
        raw = raw["config"]
    kind = raw.get("experiment", "toy")
    if kind not in PRESETS:
        raise ConfigError([("experiment", f"must be one of {sorted(PRESETS)}")])

    problems: list = []
    preset = PRESETS[kind]
    user_estimators = raw.get("estimators")
    cfg = _merge(preset, {k: v for k, v in raw.items() if k != "estimators"}, "", problems)
    if user_estimators is not None:
        if not isinstance(user_estimators, list):
            problems.append(("estimators", "expected a list of estimator sections"))
            user_estimators = []
        cfg["estimators"] = []
        for i, e in enumerate(user_estimators):
            if isinstance(e, dict):
                cfg["estimators"].append(_merge(preset["estimator"], e, f"estimators[{i}]", problems))
            else:
                problems.append((f"estimators[{i}]", "expected a section"))
                cfg["estimators"].append({})

    _check_int(cfg, "seed", problems, 0)
    _check_int(cfg, "replicates", problems, 1)
    if not isinstance(cfg.get("out"), str) or not cfg["out"]:
        problems.append(("out", "must be a nonempty path"))

    if kind in ("toy", "custom"):
        _check_int(cfg, "data.n_points", problems, 2)
        _check_num(cfg, "data.tau", problems, 0.0)
    elif kind == "lv":
        _check_int(cfg, "data.n_obs", problems, 3)
        _check_num(cfg, "data.dt", problems, 0.0)
        _check_int(cfg, "data.x0", problems, 0)
        _check_int(cfg, "data.y0", problems, 0)
        tt = cfg["data"].get("theta_true")
        if (
            not isinstance(tt, list)
            or len(tt) != 3
            or not all(isinstance(v, (int, float)) and v > 0 for v in tt)
        ):
            problems.append(("data.theta_true", "must be three positive rates"))
    else:
        _check_int(cfg, "data.side", problems, 2)
        _check_num(cfg, "data.theta_true", problems, 0.0, strict=False)
        _check_int(cfg, "data.equilibration_sweeps", problems, 1)

    specs = [("estimator", cfg["estimator"])] + [
        (f"estimators[{i}]", e) for i, e in enumerate(cfg["estimators"])
    ]
    for path, e in specs:
        if e:
            _validate_estimator(e, kind, kind, path, problems)
            _validate_cross(cfg, e, path, problems)

    s = cfg["sampler"]
    _check_int(cfg, "sampler.n_iter", problems, 1)
    _check_int(cfg, "sampler.p_particles", problems, 2)
    _check_int(cfg, "sampler.t_targets", problems, 1)
    _check_int(cfg, "sampler.l_neighbors", problems, 2)
    _check_int(cfg, "sampler.gibbs_sweeps", problems, 1)
    dim = THETA_DIM[kind]
    for name in ("theta0", "proposal_sd"):
        v = s.get(name)
        if (
            not isinstance(v, list)
            or len(v) != dim
            or not all(isinstance(x, (int, float)) and math.isfinite(x) for x in v)
        ):
            problems.append((f"sampler.{name}", f"must be a list of {dim} finite numbers"))
        elif name == "proposal_sd" and any(x < 0 for x in v):
            problems.append((f"sampler.{name}", "standard deviations cannot be negative"))

    if not problems:
        for path, e in specs:
            try:
                EstimatorConfig(
                    kind=e["kind"],
                    m=e["m"],
                    r=e["r"],
                    epsilon=e["epsilon"],
                    n=e["n"],
                    block_len=e["block_len"],
                    mu_mode=e["mu_mode"],
                )
            except (ValueError, KeyError) as exc:
                problems.append((path, str(exc)))

    if problems:
        raise ConfigError(problems)
    return ExperimentConfig(
        experiment=kind,
        seed=cfg["seed"],
        out=cfg["out"],
        replicates=cfg["replicates"],
        data=cfg["data"],
        estimator=cfg["estimator"],
        estimators=cfg["estimators"],
        sampler=cfg["sampler"],
    )


def apply_scale(cfg: ExperimentConfig, factor: float) -> ExperimentConfig:
    """Uniformly shrink or grow the run for desk-scale work.

    Scales data size (toy points), chain length, particle count, and the
    toy subsample size; structural fields (series length, grid side, block
    and tile sizes) stay fixed so divisibility is preserved.
    """
    if not factor > 0.0:
        raise ConfigError([("--scale", "factor must be positive")])
    doc = cfg.as_dict()

    def scaled(value, lo):
        return max(lo, int(round(value * factor)))

    if cfg.experiment in ("toy", "custom"):
        doc["data"]["n_points"] = scaled(doc["data"]["n_points"], 2)
        for e in [doc["estimator"]] + doc["estimators"]:
            if e.get("kind") == "BLB-SL":
                e["n"] = min(scaled(e["n"], 2), doc["data"]["n_points"])
    doc["sampler"]["n_iter"] = scaled(doc["sampler"]["n_iter"], 2)
    doc["sampler"]["p_particles"] = scaled(doc["sampler"]["p_particles"], 2)
    return validate_config(doc)
