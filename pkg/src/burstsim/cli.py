"""Command line front end.

    burstsim run --generate --mode elastic --r 3 --seed 1 --out out/
    burstsim run --generate --r 1,2,3 --out sweep/        # r-sweep
    burstsim analyze-trace trace.txt --out prof/
    burstsim gen-trace --out trace.txt --seed 7

A config file (--config) holds the same keys as the flags, one per line,
``key = value``; explicit flags win over the file.
"""

import argparse
import csv
import os
import sys
from dataclasses import replace

from .config import (
    ConfigError,
    Mode,
    RunConfig,
    desk_bursty_workload,
    desk_preset,
    paper_preset,
    paper_tail_workload,
    parse_config_file,
)
from .engine import US_PER_S
from .sim import InvariantViolation, Simulation, write_artifacts
from .workload import JobClass, TraceParseError, concurrency_profile, parse_trace, serialize_trace


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="burstsim",
                                description="hybrid-cluster scheduling simulator")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a workload and write report files")
    run.add_argument("--config", help="key=value config file; flags override it")
    run.add_argument("--mode", choices=["baseline", "elastic"], default=None)
    run.add_argument("--trace", default=None, help="workload trace file")
    run.add_argument("--generate", action="store_true", default=None,
                     help="use the bundled synthetic bursty workload")
    run.add_argument("--num-jobs", type=int, default=None,
                     help="jobs to generate (with --generate)")
    run.add_argument("--r", default=None,
                     help="cost ratio; a comma list (1,2,3) runs a sweep")
    run.add_argument("--p", type=float, default=None, help="replaced fraction of N")
    run.add_argument("--N", type=int, default=None, help="short partition size")
    run.add_argument("--general", type=int, default=None, help="general partition size")
    run.add_argument("--threshold", type=float, default=None, help="long-load resize trigger")
    run.add_argument("--hysteresis", type=float, default=None)
    run.add_argument("--provision-delay-s", type=float, default=None)
    run.add_argument("--probe-count", type=int, default=None)
    run.add_argument("--cutoff-s", type=float, default=None, help="short/long split (s)")
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--out", default=None, help="output directory (default simout)")
    run.add_argument("--preset", choices=["desk", "paper"], default=None)
    run.add_argument("--revocation-mttf-s", type=float, default=None,
                     help="enable revocations with this mean lifetime")
    run.add_argument("--revocation-warning-s", type=float, default=None)
    run.add_argument("--debug-events", action="store_true", default=None,
                     help="write an event log and check invariants live")
    run.add_argument("--no-figures", action="store_true", default=None)
    run.set_defaults(func=cmd_run)

    an = sub.add_parser("analyze-trace", help="concurrency profile of a trace")
    an.add_argument("trace", nargs="?", default=None)
    an.add_argument("--generate", action="store_true",
                    help="analyze the bundled synthetic workload instead of a file")
    an.add_argument("--preset", choices=["desk", "paper"], default="desk")
    an.add_argument("--num-jobs", type=int, default=None)
    an.add_argument("--seed", type=int, default=1)
    an.add_argument("--fine-window-s", type=float, default=100.0)
    an.add_argument("--coarse-window-s", type=float, default=600.0)
    an.add_argument("--cutoff-s", type=float, default=90.0)
    an.add_argument("--out", default="simout")
    an.add_argument("--no-figures", action="store_true")
    an.set_defaults(func=cmd_analyze)

    gen = sub.add_parser("gen-trace", help="write the synthetic workload as a trace file")
    gen.add_argument("--preset", choices=["desk", "paper"], default="desk")
    gen.add_argument("--num-jobs", type=int, default=None)
    gen.add_argument("--seed", type=int, default=1)
    gen.add_argument("--out", required=True, help="trace file to write")
    gen.set_defaults(func=cmd_gen_trace)
    return p


def _bundled_workload(preset: str, num_jobs):
    if preset == "paper":
        return paper_tail_workload(num_jobs) if num_jobs else paper_tail_workload()
    return desk_bursty_workload(num_jobs) if num_jobs else desk_bursty_workload()


def _merged_options(args) -> dict:
    opts = {}
    if args.config:
        with open(args.config) as f:
            opts.update(parse_config_file(f.read()))
    flag_map = {
        "mode": args.mode, "trace": args.trace, "generate": args.generate,
        "num_jobs": args.num_jobs, "r": args.r, "p": args.p, "N": args.N,
        "general": args.general, "threshold": args.threshold,
        "hysteresis": args.hysteresis, "provision_delay_s": args.provision_delay_s,
        "probe_count": args.probe_count, "cutoff_s": args.cutoff_s,
        "seed": args.seed, "out": args.out, "preset": args.preset,
        "revocation_mttf_s": args.revocation_mttf_s,
        "revocation_warning_s": args.revocation_warning_s,
        "debug_events": args.debug_events, "no_figures": args.no_figures,
    }
    for key, value in flag_map.items():
        if value is not None:
            opts[key] = value
    return opts


def _parse_r_list(text) -> list[float]:
    if text is None:
        return [3.0]
    try:
        values = [float(part) for part in str(text).split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"r: not a number list: {text!r}") from None
    if not values:
        raise ConfigError("r: empty list")
    return values


def _base_config(opts: dict) -> RunConfig:
    preset = opts.get("preset", "desk")
    if preset == "paper":
        cfg = paper_preset()
    elif preset == "desk":
        cfg = desk_preset()
    else:
        raise ConfigError(f"preset: unknown preset {preset!r}")

    mode_text = opts.get("mode", "elastic")
    try:
        cfg.mode = Mode(mode_text)
    except ValueError:
        raise ConfigError(f"mode: expected baseline or elastic, got {mode_text!r}") from None

    if opts.get("trace") and opts.get("generate"):
        raise ConfigError("trace and generate are mutually exclusive")
    if opts.get("trace"):
        cfg.trace_path = opts["trace"]
    elif opts.get("generate"):
        cfg.generator = _bundled_workload(preset, opts.get("num_jobs"))
    else:
        raise ConfigError("need --trace FILE or --generate")

    simple = {
        "p": "replace_fraction", "N": "short_size", "general": "general_servers",
        "threshold": "threshold", "hysteresis": "hysteresis",
        "provision_delay_s": "provisioning_delay_s", "probe_count": "probe_count",
        "cutoff_s": "cutoff_s", "seed": "seed",
        "revocation_mttf_s": "revocation_mttf_s",
        "revocation_warning_s": "revocation_warning_s",
    }
    for key, attr in simple.items():
        if key in opts:
            setattr(cfg, attr, opts[key])
    cfg.debug = bool(opts.get("debug_events"))
    cfg.figures = not opts.get("no_figures")
    cfg.out_dir = opts.get("out", "simout")
    return cfg


def cmd_run(args) -> int:
    opts = _merged_options(args)
    r_values = _parse_r_list(opts.get("r"))
    base = _base_config(opts)
    sweep = len(r_values) > 1
    rows = []
    curves = {}
    for r in r_values:
        cfg = replace(base, cost_ratio=r)
        if sweep:
            cfg.out_dir = os.path.join(base.out_dir, f"r{r:g}")
        result = _run_one(cfg)
        rows.append(_comparison_row(r, result))
        curves[f"r={r:g}"] = result.cdf_short
        _print_run_line(cfg, result)
    if sweep:
        path = os.path.join(base.out_dir, "comparison.csv")
        _write_comparison(path, rows)
        print(f"wrote {path}")
        if base.figures:
            from . import plots
            fig_path = os.path.join(base.out_dir, "comparison_cdf.png")
            plots.plot_delay_cdf(curves, fig_path)
            print(f"wrote {fig_path}")
    return 0


def _run_one(cfg: RunConfig):
    log = None
    try:
        if cfg.debug and cfg.out_dir:
            os.makedirs(cfg.out_dir, exist_ok=True)
            log = open(os.path.join(cfg.out_dir, "events.log"), "w", newline="")
        sim = Simulation(cfg, event_log=log)
        result = sim.run()
    finally:
        if log:
            log.close()
    write_artifacts(result, cfg.out_dir, figures=cfg.figures)
    return result


def _print_run_line(cfg: RunConfig, result) -> None:
    s = result.short_tasks
    t = result.summary["transient"]
    print(
        f"mode={cfg.mode.value} r={cfg.cost_ratio:g} "
        f"K={result.summary['config']['capacity']['max_transient']} "
        f"short mean={s.mean_s:.3f}s max={s.max_s:.3f}s "
        f"avg_active={t['avg_active']:.2f} savings={t['savings_fraction']:.3f} "
        f"-> {cfg.out_dir}"
    )


def _comparison_row(r: float, result) -> dict:
    s = result.short_tasks
    lg = result.long_tasks
    t = result.summary["transient"]
    return {
        "r": f"{r:g}",
        "max_transient": result.summary["config"]["capacity"]["max_transient"],
        "short_count": s.count,
        "short_mean_s": f"{s.mean_s:.3f}",
        "short_p99_s": f"{s.p99_s:.3f}",
        "short_max_s": f"{s.max_s:.3f}",
        "long_mean_s": f"{lg.mean_s:.3f}",
        "avg_active_transient": f"{t['avg_active']:.6f}",
        "avg_lifetime_h": f"{t['avg_lifetime_h']:.2f}",
        "max_lifetime_h": f"{t['max_lifetime_h']:.2f}",
        "r_normalized_on_demand": f"{t['r_normalized_on_demand']:.6f}",
        "savings_fraction": f"{t['savings_fraction']:.6f}",
    }


def _write_comparison(path: str, rows: list[dict]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=list(rows[0].keys()), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def cmd_analyze(args) -> int:
    if args.trace and args.generate:
        raise ConfigError("trace and --generate are mutually exclusive")
    if args.trace:
        with open(args.trace) as f:
            jobs = parse_trace(f, args.cutoff_s)
    elif args.generate:
        gen = _bundled_workload(args.preset, args.num_jobs)
        from .workload import generate_jobs
        jobs = generate_jobs(gen, args.seed)
    else:
        raise ConfigError("need a trace path or --generate")
    profile = concurrency_profile(jobs, args.fine_window_s, args.coarse_window_s)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "profile.csv")
    w = profile.coarse_window_us / US_PER_S
    with open(path, "w", newline="") as f:
        f.write("# omniscient concurrency, one row per window\n")
        f.write("window_start_s,avg_concurrency\n")
        for i, v in enumerate(profile.values):
            f.write(f"{i * w:.6f},{v:.6f}\n")
        f.write(f"# mean {profile.mean:.6f}\n")
        f.write(f"# std {profile.std:.6f}\n")
        busiest = max(profile.values) if profile.values else 0.0
        quietest = min(profile.values) if profile.values else 0.0
        if quietest > 0:
            f.write(f"# max/min ratio {busiest / quietest:.3f}\n")
    print(f"windows={len(profile.values)} mean={profile.mean:.3f} std={profile.std:.3f}")
    if profile.values and min(profile.values) > 0:
        print(f"max/min ratio {max(profile.values) / min(profile.values):.3f}")
    print(f"wrote {path}")
    if not args.no_figures and profile.values:
        from . import plots
        fig_path = os.path.join(args.out, "profile.png")
        plots.plot_concurrency_profile(profile, fig_path)
        print(f"wrote {fig_path}")
    return 0


def cmd_gen_trace(args) -> int:
    gen = _bundled_workload(args.preset, args.num_jobs)
    from .workload import generate_jobs
    jobs = generate_jobs(gen, args.seed)
    text = serialize_trace(jobs)
    with open(args.out, "w", newline="") as f:
        f.write(text)
    tasks = sum(len(j.tasks) for j in jobs)
    longs = sum(1 for j in jobs if j.job_class is JobClass.LONG)
    print(f"wrote {args.out}: {len(jobs)} jobs ({longs} long), {tasks} tasks")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except TraceParseError as e:
        print(f"trace error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"io error: {e}", file=sys.stderr)
        return 1
    except InvariantViolation as e:
        print(f"invariant violation: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
