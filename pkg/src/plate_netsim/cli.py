"""``plate-netsim`` command line: run scenarios, analyse traces, compare, plot.

Exit codes: 0 success, 2 configuration or usage error, 3 plant divergence,
4 missing or incomplete data.
"""

from __future__ import annotations

import argparse
import itertools
import logging
import shutil
import sys
from pathlib import Path

from . import analysis, plotting
from .analysis import DEFAULT_ALPHA, MissingDataError, TraceError
from .config import ConfigError, ScenarioConfig, from_dict
from .config import load as load_config
from .runner import RunDiverged, run_scenario

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_MISSING = 0, 2, 3, 4

log = logging.getLogger("plate_netsim")


class UsageError(Exception):
    pass


def _claim(path: Path, force: bool) -> None:
    """Refuse to overwrite ``path`` unless forced; with force, remove it first."""
    if path.exists():
        if not force:
            raise UsageError(f"{path} already exists; pass --force to overwrite")
        if path.is_dir():
            shutil.rmtree(path)
        else:
            path.unlink()


def _views(pooling: str) -> list[str]:
    return ["x", "y"] if pooling == "per-axis" else ["pooled"]


def _suffix(view: str) -> str:
    return "" if view == "pooled" else f"_{view}"


def cmd_run(args) -> int:
    cfg = load_config(args.config) if args.config else ScenarioConfig()
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.runs is not None:
        overrides["runs"] = args.runs
    if args.duration is not None:
        overrides["duration"] = args.duration
    if overrides:
        cfg = from_dict({**cfg.to_dict(), **overrides})
    target = Path(args.out) / cfg.scenario_id
    _claim(target, args.force)
    try:
        results = run_scenario(cfg, args.out, jobs=args.jobs, keep=False)
    except RunDiverged as exc:
        print(f"error: scenario {cfg.scenario_id}: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    print(f"{cfg.scenario_id}: {len(results)} run(s) written to {target}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    src = Path(args.path)
    if (src / "controller.csv").is_file():
        cfg = load_config(src / "config.snapshot.json")
        sets = [analysis.period_errors(analysis.load_trace(src), cfg.period, args.pooling,
                                       args.metric, cfg.duration, cfg.scenario_id, 0)]
        default_out = src / "errors.csv"
    else:
        cfg, sets = analysis.load_scenario(src, args.pooling, args.metric)
        default_out = src / "errors.csv"
    out = Path(args.out) if args.out else default_out
    _claim(out, args.force)
    rows = []
    for s in sets:
        run = s.run_index if len(sets) > 1 else int(src.name[4:]) if src.name[4:].isdigit() else 0
        for axis in ("x", "y"):
            rows += [[s.scenario_id, run, axis, k, f"{v:.9g}"] for k, v in enumerate(s.axis(axis))]
    plotting.write_csv(out, ["scenario", "run", "axis", "period", "error_m"], rows)
    print(f"{len(rows)} period samples ({args.metric}) written to {out}")
    return EXIT_OK


def _emit(result: analysis.MatrixResult, out_csv: Path, title: str) -> None:
    analysis.write_report(out_csv, result)
    rows = [[p.scenario_a, p.run_a, p.scenario_b, p.run_b, f"{p.ks.d_stat:.4f}",
             f"{p.ks.p_value:.3g}", "yes" if p.ks.rejected else "no"] for p in result.pairs]
    table = analysis.format_table(
        f"{title}: {result.rejections} of {len(result)} rejected",
        ["scenario_a", "run_a", "scenario_b", "run_b", "D", "p", "rejected"], rows)
    out_csv.with_suffix(".txt").write_text(table + "\n")
    print(table)


def cmd_selfsim(args) -> int:
    scen = Path(args.scenario_dir)
    cfg, sets = analysis.load_scenario(scen, args.pooling, args.metric)
    for view in _views(args.pooling):
        out = Path(args.out) if args.out else scen / f"selfsim{_suffix(view)}.csv"
        if args.out and view != "pooled":
            out = out.with_name(f"{out.stem}{_suffix(view)}{out.suffix}")
        _claim(out, args.force)
        _claim(out.with_suffix(".txt"), args.force)
        res = analysis.selfsim_matrix(sets, args.alpha, view, args.method)
        _emit(res, out, f"{cfg.scenario_id} self-similarity ({view}, alpha={args.alpha:g})")
    return EXIT_OK


def cmd_compare(args) -> int:
    dir_a, dir_b = Path(args.dir_a), Path(args.dir_b)
    cfg_a, sets_a = analysis.load_scenario(dir_a, args.pooling, args.metric)
    cfg_b, sets_b = analysis.load_scenario(dir_b, args.pooling, args.metric)
    if (cfg_a.period, cfg_a.duration) != (cfg_b.period, cfg_b.duration):
        log.warning("scenarios differ in period/duration: %s vs %s",
                    (cfg_a.period, cfg_a.duration), (cfg_b.period, cfg_b.duration))
    for view in _views(args.pooling):
        if args.out:
            out = Path(args.out)
            out = out.with_name(f"{out.stem}{_suffix(view)}{out.suffix}")
        else:
            out = dir_a.parent / f"compare_{dir_a.name}__{dir_b.name}{_suffix(view)}.csv"
        _claim(out, args.force)
        _claim(out.with_suffix(".txt"), args.force)
        res = analysis.cross_matrix(sets_a, sets_b, args.alpha, view, args.method)
        _emit(res, out, f"{dir_a.name} vs {dir_b.name} ({view}, alpha={args.alpha:g})")
    return EXIT_OK


def cmd_report(args) -> int:
    loaded = [analysis.load_scenario(Path(d), args.pooling, args.metric) for d in args.scenario_dirs]
    prefix = Path(args.out) if args.out else Path(args.scenario_dirs[0]).parent / "summary"
    csv_path, txt_path = prefix.with_suffix(".csv"), prefix.with_suffix(".txt")
    _claim(csv_path, args.force)
    _claim(txt_path, args.force)
    rows = []
    for view in _views(args.pooling):
        for cfg, sets in loaded:
            if len(sets) >= 2:
                res = analysis.selfsim_matrix(sets, args.alpha, view, args.method)
                rows.append(["selfsim", view, cfg.scenario_id, cfg.scenario_id, len(res),
                             res.rejections])
        for (ca, sa), (cb, sb) in itertools.combinations(loaded, 2):
            res = analysis.cross_matrix(sa, sb, args.alpha, view, args.method)
            rows.append(["cross", view, ca.scenario_id, cb.scenario_id, len(res), res.rejections])
    header = ["kind", "view", "scenario_1", "scenario_2", "N", "rejected"]
    plotting.write_csv(csv_path, header, rows)
    table = analysis.format_table(f"KS rejections at p<{args.alpha:g}", header, rows)
    txt_path.write_text(table + "\n")
    print(table)
    return EXIT_OK


def cmd_plot(args) -> int:
    run_dir = Path(args.run_dir)
    cfg = load_config(run_dir / "config.snapshot.json") if (run_dir / "config.snapshot.json").is_file() \
        else None
    if cfg is None:
        raise MissingDataError(f"missing {run_dir / 'config.snapshot.json'}")
    if not 0 <= args.period_index < cfg.n_periods:
        raise UsageError(f"--period-index must be in [0, {cfg.n_periods - 1}]")
    trace = analysis.load_trace(run_dir)
    out = Path(args.out) if args.out else run_dir / "plots"
    _claim(out, args.force)
    out.mkdir(parents=True)
    plotting.write_one_period(out, trace, cfg.period, args.period_index, svg=not args.no_svg)
    errs = analysis.period_errors(trace, cfg.period, "pooled", args.metric, cfg.duration,
                                  cfg.scenario_id)
    plotting.write_histogram(out, errs.samples, args.bins)
    if args.other:
        other = Path(args.other)
        ocfg = load_config(other / "config.snapshot.json")
        oerrs = analysis.period_errors(analysis.load_trace(other), ocfg.period, "pooled",
                                       args.metric, ocfg.duration, ocfg.scenario_id)
        named = {f"{cfg.scenario_id}/{run_dir.name}": errs.samples,
                 f"{ocfg.scenario_id}/{other.name}": oerrs.samples}
    else:
        named = {"x": errs.x, "y": errs.y}
    plotting.write_ecdf(out, named, svg=not args.no_svg)
    print(f"plot data written to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="plate-netsim", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def analysis_flags(sp, alpha=True):
        if alpha:
            sp.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
            sp.add_argument("--exact", action="store_const", const="exact", default="asymptotic",
                            dest="method", help="exact permutation p-values (n*m <= 10^4)")
        sp.add_argument("--pooling", choices=analysis.AXIS_MODES, default="pooled")
        sp.add_argument("--metric", choices=analysis.METRICS, default="abs")
        sp.add_argument("--out")
        sp.add_argument("--force", action="store_true")

    sp = sub.add_parser("run", help="simulate every run of a scenario")
    sp.add_argument("--config")
    sp.add_argument("--out", default="runs")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--runs", type=int)
    sp.add_argument("--duration", type=float)
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--force", action="store_true")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("analyze", help="per-period error samples of a run or scenario")
    sp.add_argument("path")
    analysis_flags(sp, alpha=False)
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("selfsim", help="pairwise KS tests among one scenario's runs")
    sp.add_argument("scenario_dir")
    analysis_flags(sp)
    sp.set_defaults(func=cmd_selfsim)

    sp = sub.add_parser("compare", help="cross KS tests between two scenarios' runs")
    sp.add_argument("dir_a")
    sp.add_argument("dir_b")
    analysis_flags(sp)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("report", help="rejection-count summary over several scenarios")
    sp.add_argument("scenario_dirs", nargs="+")
    analysis_flags(sp)
    sp.set_defaults(func=cmd_report)

    sp = sub.add_parser("plot", help="one-period, histogram and ECDF plot data")
    sp.add_argument("run_dir")
    sp.add_argument("--other", help="second run directory for the ECDF overlay")
    sp.add_argument("--period-index", type=int, default=0)
    sp.add_argument("--bins", type=int, default=30)
    sp.add_argument("--no-svg", action="store_true")
    analysis_flags(sp, alpha=False)
    sp.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "alpha", 0.5) is not None and not 0 < getattr(args, "alpha", 0.5) < 1:
        print("error: --alpha must be in (0, 1)", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MissingDataError, TraceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING


if __name__ == "__main__":
    sys.exit(main())
