"""YAML configuration: schema, defaults and validation.

Example::

    density:
      kind: uniform_cube
      dimension: 2
    norm: inf
    n_list: [1000, 10000]
    replicates: 50
    base_seed: 12345
    params: {c: 1.0, beta: 0.0, epsilon: 0.2, alpha: 0.5}
    workers: 1
    output: {dir: results, stem: null}
    numerics:
      budget: {directions: 128, growth: 1.04, s_min_rel: 1.0e-6, max_error: 1.0e-3, chunk: 64}
      tolerances: {closed_form: 1.0e-8, quadrature: 1.0e-5}
      degree_slack: [1.1, 0.9]
    verify: {grid_size: 10, directions: 8, steps: 4, points: 2048}
    build_one: {n: 1000, mode: {kind: fixed_c, c: 1.0}}
"""
from __future__ import annotations

import copy
from pathlib import Path

import yaml

from .density.models import density_from_config
from .experiments import ExperimentConfig

DEFAULTS: dict = {
    "density": None,
    "norm": "inf",
    "n_list": [1000],
    "replicates": 10,
    "base_seed": 12345,
    "params": {"c": 1.0, "beta": 0.0, "epsilon": 0.2, "alpha": 0.5},
    "workers": 1,
    "output": {"dir": None, "stem": None},
    "numerics": {
        "budget": {"directions": 128, "growth": 1.04, "s_min_rel": 1e-6, "max_error": 1e-3, "chunk": 64},
        "tolerances": {"closed_form": 1e-8, "quadrature": 1e-5},
        "degree_slack": [1.1, 0.9],
    },
    "verify": {"grid_size": 10, "directions": 8, "steps": 4, "points": 2048},
    "build_one": {"n": 1000, "mode": {"kind": "fixed_c", "c": 1.0}},
}

_FREE_FORM = {"density", "mode"}


class ConfigError(ValueError):
    pass


def _merge(base: dict, upd: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in upd.items():
        if k not in base:
            raise ConfigError(f"unknown config key {where}{k!r}")
        if isinstance(base[k], dict) and k not in _FREE_FORM:
            if not isinstance(v, dict):
                raise ConfigError(f"config key {where}{k!r} must be a mapping")
            out[k] = _merge(base[k], v, f"{where}{k}.")
        else:
            out[k] = v
    return out


def parse_config(data) -> dict:
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping at top level")
    data = dict(data)
    data.pop("experiment", None)  # the subcommand decides
    cfg = _merge(DEFAULTS, data)
    if not isinstance(cfg["density"], dict) or "kind" not in cfg["density"]:
        raise ConfigError("config needs a 'density' mapping with a 'kind'")
    try:
        density_from_config(cfg["density"])
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"invalid density: {exc}") from None
    if isinstance(cfg["n_list"], (int, float)):
        cfg["n_list"] = [cfg["n_list"]]
    return cfg


def load_config(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        data = yaml.safe_load(p.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{p}: not valid YAML ({exc})") from None
    return parse_config(data)


def apply_overrides(cfg: dict, overrides: dict) -> dict:
    """Flag overrides: seed, n (list), replicates, output_dir, workers, and
    the params c, beta, epsilon, alpha."""
    cfg = copy.deepcopy(cfg)
    for k, v in overrides.items():
        if v is None:
            continue
        if k == "seed":
            cfg["base_seed"] = int(v)
        elif k == "n":
            cfg["n_list"] = [float(x) for x in v]
        elif k == "replicates":
            cfg["replicates"] = int(v)
        elif k == "output_dir":
            cfg["output"]["dir"] = str(v)
        elif k == "workers":
            cfg["workers"] = int(v)
        elif k in ("c", "beta", "epsilon", "alpha"):
            cfg["params"][k] = float(v)
        elif k == "grid_size":
            cfg["verify"]["grid_size"] = int(v)
        else:
            raise ConfigError(f"unknown override {k!r}")
    return cfg


def experiment_config(cfg: dict, experiment: str) -> ExperimentConfig:
    prm = cfg["params"]
    num = cfg["numerics"]
    try:
        return ExperimentConfig(
            experiment=experiment,
            density=dict(cfg["density"]),
            norm=str(cfg["norm"]),
            n_list=list(cfg["n_list"]),
            replicates=cfg["replicates"],
            base_seed=int(cfg["base_seed"]),
            c=float(prm["c"]),
            beta=float(prm["beta"]),
            epsilon=float(prm["epsilon"]),
            alpha=float(prm["alpha"]),
            workers=cfg["workers"],
            budget=dict(num["budget"]),
            tolerances=dict(num["tolerances"]),
            degree_slack=tuple(num["degree_slack"]),
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
