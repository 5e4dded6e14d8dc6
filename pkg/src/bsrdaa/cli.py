"""Command-line interface: ``bsrdaa run|compare|sweep|design|channel``."""
from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import control
from .channel import eig_analysis, load_channel, planar_array, random_channel, save_channel, synth_channel
from .errors import BSRDAAError, ConfigError
from .scenario import ALL_METHODS, ScenarioConfig, load_config, run_comparison, run_scenario, run_sweep
from .trace import atomic_write_text
from .trajectory import ArrayPairSpec

OUTPUT_ENV = "BSRDAA_OUTPUT_DIR"


def output_dir(args):
    d = getattr(args, "out_dir", None) or os.environ.get(OUTPUT_ENV) or "bsrdaa_out"
    return Path(d)


def _scenario_from_args(args):
    cfg = load_config(args.config) if args.config else ScenarioConfig()
    kw = {}
    if args.seed is not None:
        kw["seed"] = args.seed
    if args.duration is not None:
        kw["duration"] = args.duration
    if args.feature_carrier:
        kw["feature_carrier"] = True
    if args.engine is not None:
        kw["engine"] = args.engine
    if getattr(args, "method", None) is not None:
        kw["method"] = args.method
    if args.trajectory is not None:
        traj = {"kind": args.trajectory}
        if args.angle is not None:
            traj["angle_deg"] = args.angle
        kw["trajectory"] = traj
    elif args.angle is not None:
        kw["trajectory"] = {**cfg.trajectory, "angle_deg": args.angle}
    ctl = {}
    for name in ("k_f", "k_i", "b_db", "reference_dbw"):
        v = getattr(args, name, None)
        if v is not None:
            ctl[name] = v
    if ctl:
        kw["controller"] = replace(cfg.controller, **ctl)
    if getattr(args, "raw_dump", None):
        kw["outputs"] = {**cfg.outputs, "raw_dump": args.raw_dump}
    # re-run validation with the overrides applied
    return ScenarioConfig(**{**cfg.__dict__, **kw})


def _add_scenario_flags(p):
    p.add_argument("--config", help="scenario JSON file")
    p.add_argument("--seed", type=int)
    p.add_argument("--duration", type=float, help="simulated time in seconds")
    p.add_argument("--engine", choices=("phasor", "carrier"))
    p.add_argument("--feature-carrier", action="store_true",
                   help="enable the carrier-level engine")
    p.add_argument("--trajectory", choices=("static", "revolve", "obstruction-transit"))
    p.add_argument("--angle", type=float, help="generator offset angle in degrees")
    p.add_argument("--k-f", dest="k_f", type=float)
    p.add_argument("--k-i", dest="k_i", type=float)
    p.add_argument("--bias", dest="b_db", type=float)
    p.add_argument("--reference", dest="reference_dbw", type=float)
    p.add_argument("--out-dir", help=f"output directory (default ${OUTPUT_ENV} or ./bsrdaa_out)")
    p.add_argument("--plots", action="store_true", help="also write SVG figures")


def cmd_run(args):
    cfg = _scenario_from_args(args)
    tr = run_scenario(cfg)
    out = output_dir(args)
    path = Path(cfg.outputs.get("trace") or out / "trace.csv")
    tr.write_csv(path)
    print(f"wrote {path} ({len(tr)} rows)")
    if args.plots:
        from .plotting import emit_plots

        for p in emit_plots(tr, {"stem": path.stem}, out):
            print(f"wrote {p}")
    return 0


def cmd_compare(args):
    cfg = _scenario_from_args(args)
    methods = [m for m in args.methods.split(",") if m] if args.methods is not None else list(ALL_METHODS)
    rep = run_comparison(cfg, methods)
    out = output_dir(args)
    for m, res in rep.results.items():
        res.trace.write_csv(out / f"compare_{m}.csv")
    summary = rep.summary()
    atomic_write_text(out / "comparison.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    for m, s in summary.items():
        print(f"{m:26s} settle {s['settling_time_s'] * 1e6:8.3f} us  "
              f"mean ratio {s['mean_ratio']:.4f}  final ratio {s['final_ratio']:.4f}")
    if args.plots:
        from .plotting import emit_plots

        for p in emit_plots(rep, {"stem": "comparison"}, out):
            print(f"wrote {p}")
    return 0


def cmd_sweep(args):
    spec = {"kind": args.kind, "seed": args.seed}
    if args.spec:
        with open(args.spec) as fh:
            spec.update(json.load(fh))
    table = run_sweep(spec)
    out = output_dir(args)
    path = out / f"sweep_{args.kind}.csv"
    atomic_write_text(path, table.to_csv())
    print(f"wrote {path} ({len(table.rows)} rows)")
    for k, v in table.summary.items():
        print(f"{k}: {v:.6g}")
    if args.plots:
        from .plotting import emit_plots

        plot_spec = {"stem": f"sweep_{args.kind}"}
        if args.kind == "bias":
            plot_spec.update(x=1, y=2, group=0)
        elif args.kind == "gain":
            plot_spec.update(x=0, y=2)
        for p in emit_plots(table, plot_spec, out):
            print(f"wrote {p}")
    return 0


def cmd_design(args):
    plant = control.PlantParams(t_p=args.t_p)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        c = control.design_gains(args.t_s, plant, k_f=args.k_f)
    report = control.design_report(c, plant)
    report["warnings"] = [str(w.message) for w in caught]
    if args.json:
        print(json.dumps(report, indent=2))
        return 0
    print(f"K_F = {c.k_f:g}   K_I = {c.k_i:.6g} 1/s   t_p = {plant.t_p:.4g} s")
    print(f"poles: {report['poles'][0]}  {report['poles'][1]}  ({report['damping_class']})")
    ts = report["settling_time_s"]
    print(f"settling time: {'undefined (ringing)' if ts is None else f'{ts:.4g} s'}")
    ov = report["overshoot_per_db_disturbance"]
    if ov is not None:
        print(f"peak excursion per dB of step disturbance: {ov:.4g} dB")
    print(f"ramp error at 1 dB/us: {report['ramp_error_per_db_per_us']:.4g} dB")
    for w in report["warnings"]:
        print(f"warning: {w}")
    return 0


def cmd_channel_gen(args):
    if args.kind == "random":
        ch = random_channel(args.n, args.m, np.random.default_rng(args.seed))
    else:
        spec = ArrayPairSpec()
        ch = synth_channel(spec.generator(np.radians(args.angle)), spec.receiver())
    save_channel(ch, args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_channel_inspect(args):
    ch = load_channel(args.path)
    ea = eig_analysis(ch)
    info = {
        "n": ch.n,
        "m": ch.m,
        "z0_ohm": ch.z0,
        "sigma_max": ch.sigma_max,
        "xi": [float(x) for x in ea.xi],
        "xi_max": ea.xi_max,
        "multiplicity": ea.multiplicity,
        "marginal_loop_gain_db": float(-20 * np.log10(ea.xi_max)) if ea.xi_max > 0 else None,
    }
    print(json.dumps(info, indent=2))
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="bsrdaa", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one scenario and write its trace")
    _add_scenario_flags(p)
    p.add_argument("--method", choices=ALL_METHODS)
    p.add_argument("--raw-dump", help="carrier engine: write receiver samples (float64 LE)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="run several methods on one trajectory")
    _add_scenario_flags(p)
    p.add_argument("--methods", help=f"comma-separated subset of {','.join(ALL_METHODS)}")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", help="bias, loop-gain or marginal-regression sweep")
    p.add_argument("kind", choices=("bias", "gain", "regression"))
    p.add_argument("--spec", help="JSON file with sweep parameters")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir")
    p.add_argument("--plots", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("design", help="PI gain design report")
    p.add_argument("--t-s", dest="t_s", type=float, required=True, help="target settling time (s)")
    p.add_argument("--t-p", dest="t_p", type=float, default=26.33e-9, help="loop time (s)")
    p.add_argument("--k-f", dest="k_f", type=float, default=1.0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("channel", help="generate or inspect channel files")
    csub = p.add_subparsers(dest="channel_command", required=True)
    g = csub.add_parser("gen")
    g.add_argument("--kind", choices=("random", "geometry"), default="random")
    g.add_argument("--n", type=int, default=4)
    g.add_argument("--m", type=int, default=4)
    g.add_argument("--angle", type=float, default=0.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_channel_gen)
    i = csub.add_parser("inspect")
    i.add_argument("path")
    i.set_defaults(func=cmd_channel_inspect)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (BSRDAAError, OSError) as exc:
        kind = "config error" if isinstance(exc, ConfigError) else "error"
        print(f"bsrdaa: {kind}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
