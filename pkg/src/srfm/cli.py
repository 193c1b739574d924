"""Command line entry point: ``srfm spectrum|sweep|fit|reproduce``.

Exit codes: 0 success, 2 configuration error, 3 solver non-convergence,
4 I/O or input-data error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .analysis import AnalysisError
from .config import REPRODUCE_TARGETS, ConfigError, load_config, load_preset
from .model import ConvergenceError
from .runner import InputDataError, run_fit, run_spectrum, run_sweep

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_IO = 0, 2, 3, 4


def _overrides(args):
    out = {}
    if getattr(args, "grid_points", None) is not None:
        out["probe_points"] = args.grid_points
    return out


def _summary_spectrum(run):
    line = f"{run.config.scenario_id}: "
    if run.width_estimate is not None:
        line += f"0.87*delta_mm = {run.width_estimate:.3f} GHz"
    if run.fit is not None:
        line += (f"; doublet splitting {run.fit.splitting:.3f} GHz, width {run.fit.width:.3f} GHz"
                 f", converged={run.fit.converged}")
        if run.asymmetry is not None:
            line += f", asymmetry {run.asymmetry:+.3f}"
    return line


def _summary_sweep(run):
    ok = sum(p.fit_ok for p in run.points)
    lf = run.linear_fit
    return (f"{run.config.scenario_id}: {ok}/{len(run.points)} points fitted; "
            f"slope {lf.slope:.4f} +/- {lf.slope_stderr:.4f}")


def _run_config(config, args):
    if config.is_sweep:
        run = run_sweep(config, out_dir=args.out, fmt=args.format, threads=args.threads)
        print(_summary_sweep(run))
    else:
        run = run_spectrum(config, out_dir=args.out, fmt=args.format)
        print(_summary_spectrum(run))


def cmd_spectrum(args):
    config = load_config(args.config, overrides=_overrides(args))
    if config.is_sweep:
        raise ConfigError("sweep_rabi_GHz: spectrum does not take a sweep axis; use 'srfm sweep'")
    _run_config(config, args)


def cmd_sweep(args):
    config = load_config(args.config, overrides=_overrides(args))
    if not config.is_sweep:
        raise ConfigError("sweep_rabi_GHz: no sweep axis (sweep_rabi_GHz or sweep_power_W) given")
    _run_config(config, args)


def cmd_fit(args):
    phase = None if args.phase == "free" else float(args.phase)
    run = run_fit(args.input, out_dir=args.out, phase=phase, max_iter=args.max_iter)
    if args.out is None:
        print(json.dumps(run.report(), indent=2))
    f = run.fit
    print(f"fit: splitting {f.splitting:.6g} GHz, width {f.width:.6g} GHz, converged={f.converged}, "
          f"degenerate={f.degenerate}", file=sys.stderr)


def cmd_reproduce(args):
    for name in REPRODUCE_TARGETS[args.figure]:
        _run_config(load_preset(name, overrides=_overrides(args)), args)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", type=Path, default=None, help="output directory")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--grid-points", type=int, default=None, help="override probe_points")
    common.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")

    parser = argparse.ArgumentParser(prog="srfm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", parents=[common], help="compute one FM reflection spectrum")
    p.add_argument("--config", type=Path, required=True)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("sweep", parents=[common], help="splitting versus generalized Rabi frequency")
    p.add_argument("--config", type=Path, required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("fit", parents=[common], help="fit a doublet to a two-column CSV")
    p.add_argument("input", type=Path)
    p.add_argument("--phase", default="free", help="'free' or a fixed phase in radians")
    p.add_argument("--max-iter", type=int, default=500)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("reproduce", parents=[common], help="run a shipped preset")
    p.add_argument("figure", choices=sorted(REPRODUCE_TARGETS))
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be at least 1")
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"solver did not converge: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (InputDataError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (AnalysisError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
