"""Command-line front end.

Every subcommand echoes its full configuration (including the seed) in a
JSON manifest.  Files are written atomically.  Exit codes: 0 success, 2
invalid configuration, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__, chain, fluid
from ._io import atomic_write_text, csv_text, json_text
from .beta import BetaSeries, analyze, load_series, parse_preset
from .collapse import TRACE_COLUMNS, collapse
from .harness import ExperimentConfig, TrialError, run_experiment, trial_rng, two_point_mass
from .hypergraph import Hypergraph, sample_poisson

log = logging.getLogger("hypercollapse")

DEFAULTS = {
    "beta": None,
    "preset": None,
    "n": 1000,
    "trials": 1,
    "seed": 0,
    "engine": "chain",
    "out": None,
    "format": "csv",
    "workers": 1,
    "points": 201,
    "t_max": None,
    "graph": None,
    "order": "random",
    "tol": 0.005,
    "class_tol": 0.05,
}


class ConfigError(ValueError):
    pass


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file of option defaults (flags override it)")
    src = p.add_argument_group("series")
    src.add_argument("--beta", help="JSON array [beta_0, beta_1, ...] or a file containing one")
    src.add_argument("--preset", help="example21:p,alpha | example22:alpha | tangent:zero,degree")
    p.add_argument("--n", type=int, help="number of vertices N")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int, help="master seed (u64)")
    p.add_argument("--engine", choices=("full", "chain"))
    p.add_argument("--out", help="output path (stdout when omitted)")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--workers", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hypercollapse", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("threshold", help="z_star and tangential zeros of the threshold function")
    _common(p)
    p = sub.add_parser("fluid", help="fluid path t, x1, x2, x3, sigma_sq")
    _common(p)
    p.add_argument("--points", type=int)
    p.add_argument("--t-max", dest="t_max", type=float)
    p = sub.add_parser("sample", help="draw a Poisson(beta) hypergraph")
    _common(p)
    p = sub.add_parser("collapse", help="collapse one hypergraph with the full engine")
    _common(p)
    p.add_argument("--graph", help="hypergraph file; sampled from the series when omitted")
    p.add_argument("--order", choices=("random", "lowest"))
    p = sub.add_parser("chain", help="one trajectory of the patch/debris chain")
    _common(p)
    p = sub.add_parser("experiment", help="many trials, per-trial CSV plus manifest")
    _common(p)
    p.add_argument("--tol", type=float, help="tolerance for mean fractions vs the limits")
    p.add_argument("--class-tol", dest="class_tol", type=float, help="classification radius (critical case)")
    p = sub.add_parser("zlaw", help="exact draws of the critical-case terminal fraction")
    _common(p)
    p.add_argument("--class-tol", dest="class_tol", type=float)
    return parser


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults < config file < command-line flags."""
    from_file = {}
    if getattr(args, "config", None):
        try:
            from_file = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        if not isinstance(from_file, dict):
            raise ConfigError("config file must hold a JSON object")
    cfg = {"command": args.command}
    for key, default in DEFAULTS.items():
        flag = getattr(args, key, None)
        cfg[key] = flag if flag is not None else from_file.get(key, default)
    if isinstance(cfg["beta"], list):
        cfg["beta"] = json.dumps(cfg["beta"])
    return cfg


def _series(cfg: dict) -> BetaSeries:
    if (cfg["beta"] is None) == (cfg["preset"] is None):
        raise ConfigError("give exactly one of --beta or --preset")
    try:
        return load_series(cfg["beta"]) if cfg["beta"] is not None else parse_preset(cfg["preset"])
    except (ValueError, TypeError, OSError) as exc:
        raise ConfigError(f"invalid series: {exc}") from exc


def _emit(cfg: dict, text: str, manifest: dict | None = None) -> None:
    out = cfg["out"]
    if out is None:
        sys.stdout.write(text)
        if manifest is not None and cfg["format"] == "csv":
            sys.stderr.write(json_text(manifest))
        return
    if manifest is not None:
        atomic_write_text(Path(out).with_suffix(".manifest.json"), json_text(manifest))
    atomic_write_text(out, text)


def _manifest(cfg: dict, series: BetaSeries | None, **extra) -> dict:
    m = {"config": dict(cfg), "seed": cfg["seed"]}
    if series is not None:
        m["config"]["series"] = list(series.coeffs)
    m.update(extra)
    return m


def cmd_threshold(cfg: dict) -> None:
    series = _series(cfg)
    report = analyze(series, keep_samples=cfg["format"] == "csv" and cfg["out"] is not None)
    status = "DEGENERATE" if report.degenerate else ("CRITICAL" if report.critical else "GENERIC")
    body = {"status": status, **report.to_dict(), "pure_debris": series.is_pure_debris}
    if cfg["format"] == "json" or cfg["out"] is None:
        _emit(cfg, json_text(_manifest(cfg, series, report=body)))
    else:
        t, f = report.f_samples
        _emit(cfg, csv_text(("t", "f"), zip(t.tolist(), f.tolist())), _manifest(cfg, series, report=body))


def cmd_fluid(cfg: dict) -> None:
    series = _series(cfg)
    try:
        rep = fluid.fluid_report(series, points=int(cfg["points"]), t_max=cfg["t_max"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    extra = {
        "z_star": rep.z_star,
        "zeros": list(rep.zeros),
        "v_limit": rep.v_limit,
        "edge_limit": rep.edge_limit,
        "ode_residual": rep.path.residual,
    }
    if cfg["format"] == "json":
        cols = dict(zip(fluid.PATH_COLUMNS, (a.tolist() for a in rep.path[:5])))
        _emit(cfg, json_text(_manifest(cfg, series, **extra, path=cols)))
    else:
        _emit(cfg, csv_text(fluid.PATH_COLUMNS, rep.path.rows()), _manifest(cfg, series, **extra))


def cmd_sample(cfg: dict) -> None:
    series = _series(cfg)
    h = sample_poisson(series, int(cfg["n"]), trial_rng(cfg["seed"], 0))
    stats = {"edge_count": h.edge_count, "patches": h.patch_total, "debris": h.debris_count}
    if cfg["format"] == "json":
        _emit(cfg, json_text(_manifest(cfg, series, **stats, edges=h.edges)))
    else:
        _emit(cfg, h.to_text(), _manifest(cfg, series, **stats))


def cmd_collapse(cfg: dict) -> None:
    rng = trial_rng(cfg["seed"], 0)
    if cfg["graph"] is not None:
        try:
            h = Hypergraph.load(cfg["graph"])
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read hypergraph: {exc}") from exc
        series = None
    else:
        series = _series(cfg)
        h = sample_poisson(series, int(cfg["n"]), rng)
    trace = collapse(h, cfg["order"], rng)
    trace.seed = cfg["seed"]
    summary = trace.summary()
    if cfg["format"] == "json":
        rows = [dict(zip(TRACE_COLUMNS, r)) for r in trace.rows()]
        _emit(cfg, json_text(_manifest(cfg, series, summary=summary, trace=rows)))
    else:
        _emit(cfg, csv_text(TRACE_COLUMNS, trace.rows()), _manifest(cfg, series, summary=summary))


def cmd_chain(cfg: dict) -> None:
    series = _series(cfg)
    res = chain.run(series, int(cfg["n"]), trial_rng(cfg["seed"], 0))
    summary = res.summary(seed=cfg["seed"])
    if cfg["format"] == "json":
        rows = [dict(zip(chain.TRAJECTORY_COLUMNS, r)) for r in res.rows()]
        _emit(cfg, json_text(_manifest(cfg, series, summary=summary, trajectory=rows)))
    else:
        _emit(cfg, csv_text(chain.TRAJECTORY_COLUMNS, res.rows()), _manifest(cfg, series, summary=summary))


def cmd_experiment(cfg: dict) -> None:
    series = _series(cfg)
    try:
        config = ExperimentConfig(
            series, int(cfg["n"]), int(cfg["trials"]), int(cfg["seed"]), cfg["engine"], workers=int(cfg["workers"])
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    report = analyze(series)
    lim = fluid.limits(series, report)
    result = run_experiment(config)
    v, e = result.v_fracs(), result.edge_fracs()
    outcomes = {
        "mean_v_frac": float(v.mean()),
        "mean_edge_frac": float(e.mean()),
        "sd_v_frac": float(v.std(ddof=1)) if v.size > 1 else 0.0,
        "tolerance": cfg["tol"],
    }
    if report.critical:
        pm = two_point_mass(v, list(report.zeros) + [report.z_star], cfg["class_tol"])
        outcomes["point_masses"] = {str(k): m for k, m in pm.masses.items()}
        outcomes["unclassified"] = pm.unclassified
        outcomes["note"] = "critical case: no convergence rate is available; tolerances are empirical"
    else:
        outcomes["v_within_tol"] = abs(outcomes["mean_v_frac"] - lim.v_limit) <= cfg["tol"]
        outcomes["edge_within_tol"] = abs(outcomes["mean_edge_frac"] - lim.edge_limit) <= cfg["tol"]
    predictions = {"z_star": report.z_star, "zeros": list(report.zeros), **lim._asdict()}
    manifest = _manifest(cfg, series, predictions=predictions, outcomes=outcomes)
    rows = [(s.trial_index, s.seed, s.v_frac, s.edge_frac, s.steps) for s in result.summaries]
    columns = ("trial", "seed", "v_frac", "edge_frac", "steps")
    if cfg["format"] == "json":
        manifest["trials"] = [dict(zip(columns, r)) for r in rows]
        _emit(cfg, json_text(manifest))
    else:
        _emit(cfg, csv_text(columns, rows), manifest)


def cmd_zlaw(cfg: dict) -> None:
    series = _series(cfg)
    report = analyze(series)
    try:
        values, index = fluid.sample_z_batch(report, trial_rng(cfg["seed"], 0), int(cfg["trials"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    pm = two_point_mass(values, list(report.zeros) + [report.z_star], cfg["class_tol"])
    extra = {
        "z_star": report.z_star,
        "zeros": list(report.zeros),
        "masses": {str(k): m for k, m in pm.masses.items()},
    }
    if len(report.zeros) <= 2 and not report.degenerate:
        extra["exact_law"] = {str(k): p for k, p in fluid.z_law(report).items()}
    rows = [(k, float(v), int(i)) for k, (v, i) in enumerate(zip(values, index))]
    if cfg["format"] == "json":
        _emit(cfg, json_text(_manifest(cfg, series, **extra, samples=[r[1] for r in rows])))
    else:
        _emit(cfg, csv_text(("sample", "value", "zero_index"), rows), _manifest(cfg, series, **extra))


COMMANDS = {
    "threshold": cmd_threshold,
    "fluid": cmd_fluid,
    "sample": cmd_sample,
    "collapse": cmd_collapse,
    "chain": cmd_chain,
    "experiment": cmd_experiment,
    "zlaw": cmd_zlaw,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        cfg = resolve(args)
        COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TrialError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # noqa: BLE001 - report, never traceback, at the CLI boundary
        log.debug("runtime failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
