"""Experiment runner: reproducible subcommands emitting CSV and figures."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, analysis, apsim, dvs, threshold, workload

EXIT_OK = 0
EXIT_UNSCHEDULABLE = 1
EXIT_ERROR = 2


def _parse_config_file(path: str) -> dict[str, str]:
    """Flat `key = value` config; `#` starts a comment."""
    out = {}
    with open(path) as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected `key = value`")
            key, _, value = line.partition("=")
            out[key.strip().replace("-", "_")] = value.strip()
    return out


def _apply_config(args: argparse.Namespace, parser: argparse.ArgumentParser) -> None:
    """Config file fills in values the command line left at their defaults."""
    if not getattr(args, "config", None):
        return
    cfg = _parse_config_file(args.config)
    defaults = {a.dest: a.default for a in parser._actions}
    for key, value in cfg.items():
        if not hasattr(args, key):
            raise ValueError(f"unknown config key {key!r}")
        current = getattr(args, key)
        if current == defaults.get(key):
            default = defaults.get(key)
            if isinstance(default, bool):
                value = value.lower() in ("1", "true", "yes")
            elif isinstance(default, int):
                value = int(value)
            elif isinstance(default, float):
                value = float(value)
            setattr(args, key, value)


def _write_csv(path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        w.writerows(rows)


def _write_run_record(out_path, args: argparse.Namespace) -> None:
    """Sidecar JSON with the fully resolved config, for reproduction."""
    record = {
        "toolkit_version": __version__,
        "command": args.command,
        "config": {
            k: v for k, v in sorted(vars(args).items())
            if k not in ("func",) and not k.startswith("_")
        },
    }
    Path(str(out_path) + ".run.json").write_text(
        json.dumps(record, indent=2, sort_keys=True, default=str) + "\n"
    )


def _period_rule(args) -> threshold.PeriodRule:
    if getattr(args, "period_set", None):
        allowed = tuple(int(x) for x in args.period_set.split(","))
        return threshold.PeriodRule(allowed=allowed)
    return threshold.PeriodRule(lo=args.period_lo, hi=args.period_hi)


def _add_period_args(p):
    p.add_argument("--period-lo", type=int, default=1, help="min period")
    p.add_argument("--period-hi", type=int, default=100_000, help="max period")
    p.add_argument("--period-set", default="",
                   help="comma-separated period set (overrides the range)")


def _add_common(p):
    p.add_argument("--seed", type=int, default=0, help="master RNG seed")
    p.add_argument("--out", default="", help="output file (default: stdout)")
    p.add_argument("--config", default="", help="key=value config file")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers")
    p.add_argument("--plot", action="store_true",
                   help="also render a figure next to the CSV")


# --- subcommands ---------------------------------------------------------


def cmd_gen(args) -> int:
    rng = np.random.default_rng(np.random.SeedSequence([args.seed]))
    rule = _period_rule(args)
    if args.generator == "uunisort":
        utils = workload.gen_uunisort(args.n, args.utilization, rng)
    elif args.generator == "equal-split":
        utils = workload.gen_equal_split(args.n, args.utilization)
    else:
        raise ValueError(f"unknown generator {args.generator!r}")
    periods = rule.sample(args.n, 1, rng)[0].tolist()
    ts = workload.assemble_taskset(utils, periods)
    if args.out:
        workload.save_taskset(ts, args.out)
        _write_run_record(args.out, args)
    else:
        for t in ts:
            print(f"{t.period} {t.exec_time!r}")
    return EXIT_OK


def cmd_check(args) -> int:
    try:
        ts = workload.load_taskset(args.taskset)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    order = analysis.rm_order(ts)
    ok = True
    print(f"utilization = {workload.utilization(ts):.6f}")
    for i in range(ts.n):
        r = analysis.response_time(ts, order, i)
        if r == analysis.EXCEEDS_DEADLINE:
            ok = False
            print(f"task {i}: P={ts[i].period} c={ts[i].exec_time} "
                  f"response exceeds deadline {ts[i].deadline}")
        else:
            print(f"task {i}: P={ts[i].period} c={ts[i].exec_time} response={r:.6f}")
    print("verdict: schedulable" if ok else "verdict: unschedulable")
    return EXIT_OK if ok else EXIT_UNSCHEDULABLE


def _curve_rows(curve) -> list[list]:
    return [
        [u, p, lo, hi, t]
        for u, p, lo, hi, t in zip(
            curve.grid, curve.p_hat, curve.ci_lo, curve.ci_hi,
            curve.trials if isinstance(curve.trials, tuple)
            else (curve.trials,) * len(curve.grid),
        )
    ]


def _emit(args, header, rows, plot_fn=None):
    if args.out:
        _write_csv(args.out, header, rows)
        _write_run_record(args.out, args)
        if args.plot and plot_fn is not None:
            plot_fn(str(Path(args.out).with_suffix(".png")))
    else:
        w = csv.writer(sys.stdout)
        w.writerow(header)
        w.writerows(rows)


def cmd_sweep(args) -> int:
    curve = threshold.sweep(
        args.n, args.u_min, args.u_max, args.step, args.trials, args.seed,
        generator=args.generator, period_rule=_period_rule(args), jobs=args.jobs,
    )
    from . import plots

    _emit(
        args,
        ["utilization", "p_hat", "ci_lo", "ci_hi", "trials"],
        _curve_rows(curve),
        lambda p: plots.plot_threshold_curves([curve], p),
    )
    return EXIT_OK


def cmd_threshold(args) -> int:
    curve = threshold.sweep(
        args.n, args.u_min, args.u_max, args.step, args.trials, args.seed,
        generator=args.generator, period_rule=_period_rule(args), jobs=args.jobs,
    )
    est = threshold.locate_threshold(curve, epsilon=args.epsilon)
    from . import plots

    _emit(
        args,
        ["n", "u_star", "width", "epsilon", "seed"],
        [[args.n, est.u_star, est.width, est.epsilon, args.seed]],
        lambda p: plots.plot_threshold_curves([curve], p),
    )
    return EXIT_OK


def cmd_width(args) -> int:
    n_list = [int(x) for x in args.n_list.split(",")]
    widths, slope = threshold.width_scaling(
        n_list, args.u_min, args.u_max, args.step, args.trials, args.seed,
        generator=args.generator, period_rule=_period_rule(args),
        epsilon=args.epsilon, jobs=args.jobs,
    )
    from . import plots

    rows = [[n, w] for n, w in widths] + [["slope", slope]]
    _emit(args, ["n", "width"], rows,
          lambda p: plots.plot_width_scaling(widths, slope, p))
    return EXIT_OK


def cmd_apsim(args) -> int:
    rng = np.random.default_rng(np.random.SeedSequence([args.seed]))
    streams = apsim.gen_streams(
        args.streams, args.target_util, rng, max_cd_ratio=args.cd_cap,
    )
    trace = [] if args.trace else None
    report = apsim.simulate_dm(streams, args.horizon, rng=rng, trace=trace)
    if args.trace:
        _write_csv(args.trace, ["time", "event", "stream", "job", "detail"],
                   [list(e) for e in trace])
    rows = [[
        report.released, report.completed, report.missed,
        report.miss_fraction, report.max_synthetic_util,
    ]]
    _emit(args, ["released", "completed", "missed", "miss_fraction",
                 "max_synthetic_util"], rows)
    return EXIT_OK


def cmd_dvs(args) -> int:
    profile = dvs.load_profile(args.profile) if args.profile else dvs.DvsProfile()
    report = dvs.run_benchmark(
        args.set_point, args.load, n_sessions=args.sessions, seed=args.seed,
        profile=profile, hysteresis=args.hysteresis,
        exec_noise_sd=args.exec_noise,
    )
    rows = [[
        report.load, report.set_point, report.energy, report.avg_power,
        report.miss_fraction, report.admitted, report.rejected,
    ]]
    _emit(args, ["load", "set_point", "energy", "avg_power", "miss_fraction",
                 "admitted", "rejected"], rows)
    return EXIT_OK


# --- figure recipes ------------------------------------------------------

RECIPES = ("fig3a", "fig3b", "fig5", "fig4", "fig8")


def cmd_recipe(args) -> int:
    from . import plots

    name = args.name
    if name not in RECIPES:
        print(f"error: unknown recipe {name!r} (want one of {', '.join(RECIPES)})",
              file=sys.stderr)
        return EXIT_ERROR
    out = args.out or f"{name}.csv"
    args.out = out

    if name in ("fig3a", "fig3b"):
        generator = "uunisort" if name == "fig3a" else "equal-split"
        curves = [
            threshold.sweep(n, 0.6, 1.0, 0.02, args.trials, args.seed + k,
                            generator=generator, jobs=args.jobs)
            for k, n in enumerate((8, 16, 32, 64))
        ]
        rows = [
            [c.n, u, p, lo, hi, t]
            for c in curves
            for u, p, lo, hi, t in zip(c.grid, c.p_hat, c.ci_lo, c.ci_hi, c.trials)
        ]
        _emit(args, ["n", "utilization", "p_hat", "ci_lo", "ci_hi", "trials"],
              rows, lambda p: plots.plot_threshold_curves(curves, p))
    elif name == "fig5":
        rule = threshold.PeriodRule(allowed=threshold.RESTRICTED_PERIOD_SET)
        curve = threshold.sweep(32, 0.7, 1.0, 0.02, args.trials, args.seed,
                                period_rule=rule, jobs=args.jobs)
        _emit(args, ["utilization", "p_hat", "ci_lo", "ci_hi", "trials"],
              _curve_rows(curve),
              lambda p: plots.plot_threshold_curves([curve], p))
    elif name == "fig4":
        grid = [round(0.4 + 0.05 * k, 2) for k in range(13)]
        curve = apsim.synthetic_sweep(
            args.streams, grid, max(args.trials // 20, 20), args.horizon,
            args.seed,
        )
        _emit(args, ["max_synthetic_util", "p_zero_miss", "ci_lo", "ci_hi",
                     "trials"],
              [[u, p, lo, hi, curve.trials]
               for u, p, lo, hi in zip(curve.grid, curve.p_hat,
                                       curve.ci_lo, curve.ci_hi)],
              lambda p: plots.plot_threshold_curves([curve], p))
    elif name == "fig8":
        rows = []
        reports = []
        for load in (0.2, 0.4, 0.6, 0.8):
            for sp in (dvs_bound(), 0.75):
                r = dvs.run_benchmark(sp, load, n_sessions=args.sessions,
                                      seed=args.seed)
                reports.append(r)
                rows.append([r.load, r.set_point, r.energy, r.avg_power,
                             r.miss_fraction, r.admitted, r.rejected])
        _emit(args, ["load", "set_point", "energy", "avg_power",
                     "miss_fraction", "admitted", "rejected"], rows,
              lambda p: plots.plot_energy_ladder(
                  [
                      {"load": r.load, "set_point": r.set_point,
                       "avg_power": r.avg_power,
                       "miss_fraction": r.miss_fraction}
                      for r in reports
                  ], p))
    return EXIT_OK


def dvs_bound() -> float:
    return round(apsim.SYNTHETIC_UTIL_BOUND, 3)


# --- parser --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sharpsched",
        description="Utilization-threshold analysis for fixed-priority scheduling",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a random task set file")
    _add_common(p)
    _add_period_args(p)
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--utilization", type=float, default=0.8)
    p.add_argument("--generator", default="uunisort",
                   choices=("uunisort", "equal-split"))
    p.set_defaults(func=cmd_gen, _parser=p)

    p = sub.add_parser("check", help="schedulability verdict for a task-set file")
    _add_common(p)
    p.add_argument("taskset", help="task-set file (period exec_time [deadline])")
    p.set_defaults(func=cmd_check, _parser=p)

    for name, fn, extra in (
        ("sweep", cmd_sweep, ()),
        ("threshold", cmd_threshold, ("epsilon",)),
        ("width", cmd_width, ("epsilon", "n_list")),
    ):
        p = sub.add_parser(name, help=f"Monte Carlo {name} over a utilization grid")
        _add_common(p)
        _add_period_args(p)
        p.add_argument("--n", type=int, default=32)
        p.add_argument("--u-min", type=float, default=0.6)
        p.add_argument("--u-max", type=float, default=1.0)
        p.add_argument("--step", type=float, default=0.02)
        p.add_argument("--trials", type=int, default=2000)
        p.add_argument("--generator", default="uunisort",
                       choices=("uunisort", "equal-split"))
        if "epsilon" in extra:
            p.add_argument("--epsilon", type=float, default=0.1)
        if "n_list" in extra:
            p.add_argument("--n-list", default="8,16,32,64")
        p.set_defaults(func=fn, _parser=p)

    p = sub.add_parser("apsim", help="deadline monotonic job-stream simulation")
    _add_common(p)
    p.add_argument("--streams", type=int, default=100)
    p.add_argument("--cd-cap", type=float, default=apsim.DEFAULT_CD_CAP)
    p.add_argument("--target-util", type=float, default=0.5)
    p.add_argument("--horizon", type=float, default=100_000.0)
    p.add_argument("--trace", default="", help="per-event trace CSV path")
    p.set_defaults(func=cmd_apsim, _parser=p)

    p = sub.add_parser("dvs", help="speed-scaled admission-control benchmark")
    _add_common(p)
    p.add_argument("--set-point", type=float, default=0.75)
    p.add_argument("--load", type=float, default=0.6)
    p.add_argument("--sessions", type=int, default=1000)
    p.add_argument("--profile", default="", help="freq_mhz voltage pairs, one per line")
    p.add_argument("--hysteresis", type=float, default=100.0)
    p.add_argument("--exec-noise", type=float, default=0.0)
    p.set_defaults(func=cmd_dvs, _parser=p)

    p = sub.add_parser("recipe", help="named data-generating presets")
    _add_common(p)
    p.add_argument("name", help="one of: " + ", ".join(RECIPES))
    p.add_argument("--trials", type=int, default=2000)
    p.add_argument("--streams", type=int, default=100)
    p.add_argument("--horizon", type=float, default=20_000.0)
    p.add_argument("--sessions", type=int, default=1000)
    p.set_defaults(func=cmd_recipe, _parser=p)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config(args, getattr(args, "_parser", parser))
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
