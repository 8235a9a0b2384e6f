"""Monte Carlo sweeps over (n, replicate) cells with persisted results.

Every cell draws its own sample from a seed derived from
(base_seed, n_index, replicate), so results do not depend on the order in
which cells run or on the number of worker processes.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .density.measure import QuadratureBudget, SolverTolerances, poisson_cutoff_mass
from .density.models import ProductDensity, density_from_config
from .density.norms import NormSpec, parse_p
from .graph import (
    Connectivity,
    FixedC,
    assign_radii,
    build_digraph,
    enhance,
    is_connected,
)
from .sampling import RNG_ID, SampleSpec, replicate_seed, sample_process
from .stats import (
    UNATTAINABLE,
    DegreeSummary,
    count_isolated,
    critical_cutoff_enhanced,
    degree_bounds,
    histogram,
    nearest_neighbor_masses,
    tv_distance_to_poisson,
    zero_outdegree_from_masses,
)

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
EXPERIMENTS = ("cutoff", "poisson", "degree", "connectivity")
COLUMNS = (
    "experiment", "replicate", "n", "N", "c_or_beta", "W", "W_tilde",
    "d_n", "d_tilde_n", "Delta", "delta", "connected",
)
STAT_COLUMNS = ("W", "W_tilde", "d_n", "d_tilde_n", "Delta", "delta", "connected")
QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)


@dataclass
class ExperimentConfig:
    experiment: str
    density: dict
    norm: str = "inf"
    n_list: list = field(default_factory=lambda: [1000.0])
    replicates: int = 10
    base_seed: int = 12345
    c: float = 1.0
    beta: float = 0.0
    epsilon: float = 0.2
    alpha: float = 0.5
    workers: int = 1
    budget: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    degree_slack: tuple = (1.1, 0.9)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"experiment must be one of {EXPERIMENTS}")
        self.n_list = [float(v) for v in self.n_list]
        if not self.n_list:
            raise ValueError("n_list is empty")
        if any(b <= a for a, b in zip(self.n_list, self.n_list[1:])):
            raise ValueError("n_list must be strictly increasing")
        if self.n_list[0] <= 1:
            raise ValueError("intensities must exceed 1")
        if int(self.replicates) < 1:
            raise ValueError("replicates must be >= 1")
        self.replicates = int(self.replicates)
        self.workers = max(1, int(self.workers))
        self.degree_slack = tuple(float(v) for v in self.degree_slack)
        parse_p(self.norm)
        if self.experiment == "poisson":
            poisson_cutoff_mass(self.beta, self.n_list[0])
        if self.experiment == "degree" and not self.c > 0:
            raise ValueError("c must be positive")
        if self.experiment == "connectivity":
            if not self.epsilon > 0:
                raise ValueError("epsilon must be positive")
            if not isinstance(density_from_config(self.density), ProductDensity):
                raise ValueError("connectivity radii need a product density")
            if parse_p(self.norm) != math.inf:
                raise ValueError("connectivity radii need the sup norm (norm: inf)")

    @property
    def parameter(self) -> float | None:
        return {"cutoff": None, "poisson": self.beta, "degree": self.c, "connectivity": self.epsilon}[self.experiment]

    def to_dict(self) -> dict:
        out = asdict(self)
        out["degree_slack"] = list(self.degree_slack)
        return out


@dataclass
class SweepResult:
    experiment: str
    rows: list[dict]
    aggregates: dict
    metadata: dict
    timing: dict = field(default_factory=dict)

    def column(self, name: str, n: float | None = None) -> np.ndarray:
        rows = self.rows if n is None else [r for r in self.rows if r["n"] == float(n)]
        return np.array([np.nan if r[name] is None else float(r[name]) for r in rows], dtype=float)

    def aggregate(self, n: float) -> dict:
        return self.aggregates[_nkey(n)]


def _nkey(n: float) -> str:
    return repr(float(n))


# --------------------------------------------------------------------------
# one cell


_CACHE: dict = {}


def _context(cfg: ExperimentConfig):
    key = json.dumps(cfg.to_dict(), sort_keys=True)
    if key not in _CACHE:
        density = density_from_config(cfg.density)
        norm = NormSpec(cfg.norm, density.dim)
        _CACHE.clear()
        _CACHE[key] = (density, norm, QuadratureBudget.from_config(cfg.budget),
                       SolverTolerances.from_config(cfg.tolerances))
    return _CACHE[key]


def _blank_row(cfg, rep, n, N):
    row = dict.fromkeys(COLUMNS)
    row.update(experiment=cfg.experiment, replicate=rep, n=n, N=N, c_or_beta=cfg.parameter)
    return row


def run_cell(cfg: ExperimentConfig, n_index: int, rep: int) -> dict:
    """Statistics for one (n, replicate) cell; returns {'row', 'extra'}."""
    density, norm, budget, tols = _context(cfg)
    n = cfg.n_list[n_index]
    seed = replicate_seed(cfg.base_seed, n_index, rep)
    sample = sample_process(SampleSpec(n, seed, density))
    row = _blank_row(cfg, rep, n, sample.count)
    extra = {}
    if cfg.experiment == "cutoff":
        res = critical_cutoff_enhanced(sample, density, norm, budget=budget, tolerances=tols)
        row["d_n"] = res.d_n if res.attainable else UNATTAINABLE
        row["d_tilde_n"] = res.d_tilde_n if res.attainable else UNATTAINABLE
    elif cfg.experiment == "poisson":
        t = poisson_cutoff_mass(cfg.beta, n)
        if sample.count < 2:
            row["W"] = sample.count
        else:
            row["W"] = zero_outdegree_from_masses(nearest_neighbor_masses(sample.points, density, norm, budget=budget), t)
    else:
        mode = FixedC(cfg.c) if cfg.experiment == "degree" else Connectivity(cfg.epsilon)
        radii = assign_radii(sample, density, norm, mode, tolerances=tols, budget=budget)
        g = build_digraph(sample, radii, norm)
        eg = enhance(g)
        deg = DegreeSummary.of(g)
        row.update(W=deg.W_n, W_tilde=count_isolated(eg), Delta=deg.Delta_n, delta=deg.delta_n)
        if cfg.experiment == "connectivity":
            row["connected"] = int(is_connected(eg))
        extra["mean_out_degree"] = deg.mean
    return {"row": row, "extra": extra, "seed": seed}


def _run_cell_safe(args):
    cfg, i, r = args
    try:
        return run_cell(cfg, i, r)
    except Exception as exc:  # one bad cell must not sink the sweep
        return {"error": f"{type(exc).__name__}: {exc}", "seed": replicate_seed(cfg.base_seed, i, r),
                "n_index": i, "replicate": r}


# --------------------------------------------------------------------------
# aggregation


def _numeric(rows, name):
    vals = [r[name] for r in rows if r[name] is not None and r[name] != UNATTAINABLE]
    return np.array(vals, dtype=float)


def summarize(values: np.ndarray) -> dict:
    k = len(values)
    if k == 0:
        return {"count": 0, "mean": None, "se": None, "quantiles": None}
    se = float(np.std(values, ddof=1) / math.sqrt(k)) if k > 1 else None
    q = np.quantile(values, QUANTILES)
    return {
        "count": k,
        "mean": float(np.mean(values)),
        "se": se,
        "quantiles": {repr(p): float(v) for p, v in zip(QUANTILES, q)},
    }


def aggregate_rows(cfg: ExperimentConfig, rows: list[dict], extras: dict) -> dict:
    out = {}
    for n in cfg.n_list:
        sel = [r for r in rows if r["n"] == n]
        agg = {name: summarize(_numeric(sel, name)) for name in STAT_COLUMNS + ("N",)}
        agg["rows"] = len(sel)
        ex = extras.get(_nkey(n), {})
        if cfg.experiment == "poisson":
            w = _numeric(sel, "W").astype(np.int64)
            lam = math.exp(-cfg.beta)
            if len(w):
                hist = histogram(w)
                agg["histogram"] = hist.tolist()
                agg["lambda"] = lam
                agg["tv_to_poisson"] = tv_distance_to_poisson(hist, lam)
        if cfg.experiment == "degree" and len(sel):
            upper, lower = degree_bounds(cfg.c, n)
            ln = math.log(n)
            up_slack, low_slack = cfg.degree_slack
            Delta = _numeric(sel, "Delta")
            delta = _numeric(sel, "delta")
            agg["upper_bound"] = upper
            agg["lower_bound"] = lower
            agg["Delta_over_log_n"] = summarize(Delta / ln)
            agg["delta_over_log_n"] = summarize(delta / ln)
            agg["upper_violation_rate"] = float(np.mean(Delta > up_slack * upper))
            agg["lower_violation_rate"] = None if lower is None else float(np.mean(delta < low_slack * lower))
            agg["delta_zero_rate"] = float(np.mean(delta == 0))
            mo = np.array(ex.get("mean_out_degree", []), dtype=float)
            agg["mean_out_degree"] = summarize(mo)
            agg["expected_mean_out_degree"] = cfg.c * ln
        if cfg.experiment == "connectivity" and len(sel):
            agg["connected_fraction"] = float(_numeric(sel, "connected").mean())
        if cfg.experiment == "cutoff":
            d = _numeric(sel, "d_n")
            agg["abs_mean_d_n_minus_1"] = None if len(d) == 0 else abs(float(d.mean()) - 1.0)
        out[_nkey(n)] = agg
    return out


# --------------------------------------------------------------------------
# sweeps


def run_sweep(cfg: ExperimentConfig, overrides: dict | None = None) -> SweepResult:
    t0 = time.perf_counter()
    cells = [(cfg, i, r) for i in range(len(cfg.n_list)) for r in range(cfg.replicates)]
    if cfg.workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            outs = list(pool.map(_run_cell_safe, cells, chunksize=max(1, len(cells) // (4 * cfg.workers))))
    else:
        outs = [_run_cell_safe(c) for c in cells]

    rows, excluded, failures = [], [], []
    seeds = {_nkey(n): [] for n in cfg.n_list}
    extras: dict = {_nkey(n): {} for n in cfg.n_list}
    for (_, i, r), out in zip(cells, outs):
        n = cfg.n_list[i]
        seeds[_nkey(n)].append(out["seed"])
        if "error" in out:
            log.warning("cell n=%g replicate=%d failed (seed %d): %s", n, r, out["seed"], out["error"])
            failures.append({"n": n, "replicate": r, "seed": out["seed"], "error": out["error"]})
            continue
        row = out["row"]
        if row["d_n"] == UNATTAINABLE:
            excluded.append({"n": n, "replicate": r, "seed": out["seed"], "N": row["N"]})
            continue
        rows.append(row)
        for k, v in out["extra"].items():
            extras[_nkey(n)].setdefault(k, []).append(v)

    metadata = {
        "schema_version": SCHEMA_VERSION,
        "experiment": cfg.experiment,
        "config": cfg.to_dict(),
        "overrides": dict(overrides or {}),
        "rng": RNG_ID,
        "base_seed": cfg.base_seed,
        "seeds": seeds,
        "tolerances": asdict(SolverTolerances.from_config(cfg.tolerances)),
        "budget": asdict(QuadratureBudget.from_config(cfg.budget)),
        "excluded_unattainable": excluded,
        "failures": failures,
        "cells": len(cells),
        "extras": extras,
    }
    aggregates = aggregate_rows(cfg, rows, extras)
    timing = {"wall_time_s": time.perf_counter() - t0, "workers": cfg.workers, "backend": _kernels.BACKEND}
    return SweepResult(cfg.experiment, rows, aggregates, metadata, timing)


def _with(cfg: ExperimentConfig, experiment: str) -> ExperimentConfig:
    if cfg.experiment != experiment:
        raise ValueError(f"config is for {cfg.experiment!r}, expected {experiment!r}")
    return cfg


def run_cutoff_sweep(cfg: ExperimentConfig, overrides=None) -> SweepResult:
    """d_n and its enhanced analogue per cell."""
    return run_sweep(_with(cfg, "cutoff"), overrides)


def run_poisson_limit(cfg: ExperimentConfig, overrides=None) -> SweepResult:
    """Counts of zero-out-degree vertices at mass (log n + beta)/n, with the
    histogram and total variation distance to Po(exp(-beta)) per n."""
    return run_sweep(_with(cfg, "poisson"), overrides)


def run_degree_sweep(cfg: ExperimentConfig, overrides=None) -> SweepResult:
    """Largest and smallest out-degree against the H-function envelope."""
    return run_sweep(_with(cfg, "degree"), overrides)


def run_connectivity(cfg: ExperimentConfig, overrides=None) -> SweepResult:
    """Connectivity of the symmetrised graph under the product-density radii."""
    return run_sweep(_with(cfg, "connectivity"), overrides)


RUNNERS = {
    "cutoff": run_cutoff_sweep,
    "poisson": run_poisson_limit,
    "degree": run_degree_sweep,
    "connectivity": run_connectivity,
}


def trend_nonincreasing(values, slack: float = 0.0) -> bool:
    """values[k+1] <= values[k] + slack for every k."""
    return all(b <= a + slack for a, b in zip(values, values[1:]))


# --------------------------------------------------------------------------
# persistence


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_cell(name: str, s: str):
    if s == "":
        return None
    if s == UNATTAINABLE:
        return s
    if name in ("experiment",):
        return s
    if name in ("replicate", "N", "W", "W_tilde", "Delta", "delta", "connected"):
        return int(s)
    return float(s)


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([_cell(r[c]) for c in COLUMNS])
    return buf.getvalue()


def _paths(path) -> tuple[Path, Path, Path]:
    p = Path(path)
    stem = p.with_suffix("") if p.suffix in (".csv", ".json") else p
    return stem.with_suffix(".csv"), stem.with_suffix(".json"), Path(str(stem) + ".timing.json")


def persist(result: SweepResult, path) -> tuple[Path, Path]:
    """Write ``<stem>.csv`` (rows), ``<stem>.json`` (aggregates, config,
    seeds) and ``<stem>.timing.json``.  The first two are byte-identical
    for identical configurations."""
    csv_path, json_path, timing_path = _paths(path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    csv_path.write_text(rows_to_csv(result.rows))
    side = dict(result.metadata)
    side["aggregates"] = result.aggregates
    json_path.write_text(json.dumps(side, indent=2, sort_keys=True) + "\n")
    timing_path.write_text(json.dumps(result.timing, indent=2, sort_keys=True) + "\n")
    return csv_path, json_path


def load(path) -> SweepResult:
    csv_path, json_path, timing_path = _paths(path)
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != COLUMNS:
            raise ValueError(f"{csv_path}: unexpected header {header}")
        rows = [{c: _parse_cell(c, v) for c, v in zip(COLUMNS, line)} for line in reader]
    side = json.loads(json_path.read_text())
    if side.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"{json_path}: unsupported schema_version {side.get('schema_version')}")
    aggregates = side.pop("aggregates")
    timing = json.loads(timing_path.read_text()) if timing_path.exists() else {}
    return SweepResult(side["experiment"], rows, aggregates, side, timing)


def config_from_metadata(meta: dict) -> ExperimentConfig:
    return ExperimentConfig(**meta["config"])
