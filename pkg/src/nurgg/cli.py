"""Command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
The output directory defaults to $NURGG_OUTPUT_DIR, then ./results.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

from .config import ConfigError, apply_overrides, experiment_config, load_config

log = logging.getLogger("nurgg")

OUTPUT_ENV = "NURGG_OUTPUT_DIR"
SWEEPS = {
    "sweep-cutoff": "cutoff",
    "poisson-limit": "poisson",
    "degree-sweep": "degree",
    "connectivity": "connectivity",
}


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="YAML config file")
    p.add_argument("--seed", type=int, help="base seed (overrides base_seed)")
    p.add_argument("--n", type=float, nargs="+", help="intensities (overrides n_list)")
    p.add_argument("-R", "--replicates", type=int, help="replicates per n")
    p.add_argument("--output-dir", help=f"output directory (default ${OUTPUT_ENV} or ./results)")
    p.add_argument("--workers", type=int, help="worker processes")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    p.add_argument("-q", "--quiet", action="store_true", help="errors only")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nurgg", description="Random geometric graphs with mass-defined radii.")
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND", required=True)
    helps = {
        "sweep-cutoff": "critical cut-off levels d_n and d~_n per replicate",
        "poisson-limit": "isolated-vertex counts at mass (log n + beta)/n vs Po(exp(-beta))",
        "degree-sweep": "max/min out-degree against the H-function envelope",
        "connectivity": "connectivity of the symmetrised graph under product-density radii",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text)
        _common(p)
        if name == "poisson-limit":
            p.add_argument("--beta", type=float, help="offset beta")
        if name == "degree-sweep":
            p.add_argument("--c", type=float, help="level c")
        if name == "connectivity":
            p.add_argument("--epsilon", type=float, help="epsilon")
    p = sub.add_parser("verify-conditions", help="grid check of the Poisson-limit sufficient conditions")
    _common(p)
    p.add_argument("--alpha", type=float, help="alpha in (0, 1)")
    p.add_argument("--beta", type=float, help="offset beta")
    p.add_argument("--grid-size", type=int, help="x-grid points per axis")
    p = sub.add_parser("build-one", help="one realisation: edge lists and a statistics row")
    _common(p)
    return parser


def _overrides(args) -> dict:
    keys = ("seed", "n", "replicates", "output_dir", "workers", "c", "beta", "epsilon", "alpha", "grid_size")
    return {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}


def _out_dir(cfg: dict) -> Path:
    d = cfg["output"]["dir"] or os.environ.get(OUTPUT_ENV) or "results"
    return Path(d)


def _write_long(result, path: Path) -> None:
    """Aggregates as tidy rows: experiment, n, statistic, field, value."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["experiment", "n", "statistic", "field", "value"])
        for nkey, agg in result.aggregates.items():
            for stat, val in sorted(agg.items()):
                if isinstance(val, dict):
                    for fld in ("count", "mean", "se"):
                        if fld in val and val[fld] is not None:
                            w.writerow([result.experiment, nkey, stat, fld, repr(val[fld])])
                    for q, v in sorted((val.get("quantiles") or {}).items()):
                        w.writerow([result.experiment, nkey, stat, f"q{q}", repr(v)])
                elif isinstance(val, (int, float)) and not isinstance(val, bool):
                    w.writerow([result.experiment, nkey, stat, "value", repr(val)])


def _run_sweep(args, cfg, overrides) -> int:
    from .experiments import RUNNERS, persist

    experiment = SWEEPS[args.command]
    ecfg = experiment_config(cfg, experiment)
    result = RUNNERS[experiment](ecfg, overrides)
    out = _out_dir(cfg)
    stem = cfg["output"]["stem"] or experiment
    csv_path, json_path = persist(result, out / stem)
    _write_long(result, out / f"{stem}.long.csv")
    for nkey, agg in result.aggregates.items():
        log.info("n=%s rows=%d %s", nkey, agg["rows"], _headline(experiment, agg))
    print(f"wrote {csv_path} and {json_path}")
    failed = result.metadata["failures"]
    if failed:
        log.warning("%d cells failed; seeds listed in %s", len(failed), json_path)
    return 0


def _headline(experiment: str, agg: dict) -> str:
    if experiment == "cutoff":
        return f"mean d_n={agg['d_n']['mean']} mean d~_n={agg['d_tilde_n']['mean']}"
    if experiment == "poisson":
        return f"mean W={agg['W']['mean']} TV={agg.get('tv_to_poisson')}"
    if experiment == "degree":
        return f"upper violations={agg.get('upper_violation_rate')} lower violations={agg.get('lower_violation_rate')}"
    return f"connected fraction={agg.get('connected_fraction')}"


def _run_verify(args, cfg, overrides) -> int:
    from .density.models import density_from_config
    from .density.norms import NormSpec
    from .density.regions import verify_poisson_conditions
    from .density.measure import QuadratureBudget

    density = density_from_config(cfg["density"])
    norm = NormSpec(cfg["norm"], density.dim)
    v = cfg["verify"]
    try:
        report = verify_poisson_conditions(
            density, norm, float(cfg["params"]["alpha"]), float(cfg["params"]["beta"]),
            [float(n) for n in cfg["n_list"]], int(v["grid_size"]),
            directions=int(v["directions"]), steps=int(v["steps"]), points=int(v["points"]),
            budget=QuadratureBudget.from_config(cfg["numerics"]["budget"]),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    out = _out_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{cfg['output']['stem'] or 'verify'}.json"
    payload = report.to_dict()
    payload["overrides"] = overrides
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(report.summary())
    print(f"wrote {path}")
    return 0


def _run_build_one(args, cfg, overrides) -> int:
    from .density.measure import QuadratureBudget, SolverTolerances
    from .density.models import density_from_config
    from .density.norms import NormSpec
    from .experiments import COLUMNS
    from .graph import assign_radii, build_digraph, enhance, is_connected, mode_from_dict, write_edge_list, graph_summary
    from .sampling import SampleSpec, sample_process, save_points
    from .stats import DegreeSummary, count_isolated, critical_cutoff_enhanced

    density = density_from_config(cfg["density"])
    norm = NormSpec(cfg["norm"], density.dim)
    n = float(args.n[0]) if args.n else float(cfg["build_one"]["n"])
    try:
        mode = mode_from_dict(cfg["build_one"]["mode"])
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"build_one.mode: {exc}") from None
    budget = QuadratureBudget.from_config(cfg["numerics"]["budget"])
    tols = SolverTolerances.from_config(cfg["numerics"]["tolerances"])
    sample = sample_process(SampleSpec(n, int(cfg["base_seed"]), density))
    radii = assign_radii(sample, density, norm, mode, tolerances=tols, budget=budget)
    g = build_digraph(sample, radii, norm)
    eg = enhance(g)
    deg = DegreeSummary.of(g)
    cut = critical_cutoff_enhanced(sample, density, norm, budget=budget, tolerances=tols)
    param = next(iter(vars(mode).values()), None)
    row = {
        "experiment": "build_one", "replicate": 0, "n": n, "N": sample.count, "c_or_beta": param,
        "W": deg.W_n, "W_tilde": count_isolated(eg),
        "d_n": cut.d_n if cut.attainable else "unattainable",
        "d_tilde_n": cut.d_tilde_n if cut.attainable else "unattainable",
        "Delta": deg.Delta_n, "delta": deg.delta_n, "connected": int(is_connected(eg)),
    }
    out = _out_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    stem = cfg["output"]["stem"] or "build_one"
    save_points(sample, out / f"{stem}.points.csv")
    write_edge_list(g, out / f"{stem}.edges.csv")
    write_edge_list(eg, out / f"{stem}.enhanced_edges.csv")
    with open(out / f"{stem}.row.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        w.writerow(["" if row[c] is None else (repr(row[c]) if isinstance(row[c], float) else row[c]) for c in COLUMNS])
    summary = {"directed": graph_summary(g), "enhanced": graph_summary(eg), "seed": int(cfg["base_seed"]),
               "radius_mode": radii.mode, "radius_params": radii.params, "overrides": overrides}
    (out / f"{stem}.summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(",".join(COLUMNS))
    print(",".join("" if row[c] is None else str(row[c]) for c in COLUMNS))
    print(f"wrote {out / stem}.*")
    return 0


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.ERROR if args.quiet else (logging.DEBUG if args.verbose > 1 else
                                              logging.INFO if args.verbose else logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = _overrides(args)
        cfg = apply_overrides(load_config(args.config), overrides)
        if args.command in SWEEPS:
            return _run_sweep(args, cfg, overrides)
        if args.command == "verify-conditions":
            return _run_verify(args, cfg, overrides)
        return _run_build_one(args, cfg, overrides)
    except ConfigError as exc:
        print(f"nurgg: config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # anything else is a runtime failure
        log.debug("traceback", exc_info=True)
        print(f"nurgg: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
