"""Command-line front end.

Subcommands: generate (reference CSV from a config), train (config ->
run-directory artifacts), evaluate (saved model vs reference), regret-check
(weights CSV -> bound verdict), report (run directory -> SVG charts).
Exit codes: 0 success, 1 configuration error, 2 numerical failure.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import report as rpt
from . import simplex as sx
from . import track as tr
from . import training as trn
from .config import load_config
from .errors import ConfigurationError, DivergenceError, PwpinnError, UsageError
from .reference import (load_solution_csv, sample_training_data,
                        save_solution_csv, solve_advection_diffusion)

USAGE = """usage: pwpinn <subcommand> [options]

subcommands:
  generate      solve the reference problem and write a t,x,u CSV
  train         run the online training pipeline from a JSON config
  evaluate      score a saved run against the reference solution
  regret-check  verify the regret bound for a weights CSV
  report        render SVG charts for a saved run
"""


def _reference(config, extras):
    if extras.get("solution_csv"):
        return load_solution_csv(extras["solution_csv"], spec=config.grid)
    return solve_advection_diffusion(config.grid)


def cmd_generate(args):
    config, extras = load_config(args.config)
    sol = solve_advection_diffusion(config.grid)
    save_solution_csv(sol, args.out)
    print(f"wrote {args.out}: grid {len(sol.ts)}x{len(sol.xs)}, "
          f"lambda segments {config.grid.lambda_segments}")
    return 0


def cmd_train(args):
    config, extras = load_config(args.config)
    sol = _reference(config, extras)
    batches = sample_training_data(sol, config.n_interior, config.n_boundary,
                                   config.n_initial, config.n_batches,
                                   seed=config.seed)
    log = None
    if args.verbose:
        log = lambda msg: print(msg, flush=True)
    report, params, track, record, segments = trn.train(
        config, batches, reference=sol, log=log)
    os.makedirs(args.out_dir, exist_ok=True)
    with open(os.path.join(args.out_dir, "report.json"), "w") as fh:
        fh.write(report.to_json())
    trn.save_model(os.path.join(args.out_dir, "model.npz"), params, track)
    tr.save_track_csv(track, os.path.join(args.out_dir, "lambda_track.csv"))
    if len(record):
        sx.save_record_csv(record, os.path.join(args.out_dir, "weights.csv"))
    rows = trn.squared_error_grid(params, sol)
    np.savetxt(os.path.join(args.out_dir, "mse_grid.csv"), rows,
               delimiter=",", header="t,x,sq_error", comments="")
    print(f"run complete in {report.wall_clock_seconds:.1f}s")
    print(f"changepoints: {report.changepoints}")
    print(f"segments: {report.segments}")
    print(f"solution mse: {report.solution_mse}")
    if report.regret is not None:
        print(f"regret {report.regret:.6g} <= bound {report.regret_bound:.6g}: "
              f"{report.regret <= report.regret_bound}")
    return 0


def cmd_evaluate(args):
    config, extras = load_config(args.config)
    sol = _reference(config, extras)
    params, track = trn.load_model(os.path.join(args.run_dir, "model.npz"))
    report_path = os.path.join(args.run_dir, "report.json")
    changepoints, segments = None, None
    if os.path.exists(report_path):
        with open(report_path) as fh:
            saved = json.load(fh)
        changepoints = saved.get("changepoints")
        segments = [trn.SegmentFit(s["t_lo"], s["t_hi"], s["lambda_hat"],
                                   s["n_interior"])
                    for s in saved.get("segments", [])]
    metrics = trn.evaluate(params, sol, track=track, changepoints=changepoints,
                           segments=segments,
                           true_segments=config.grid.lambda_segments)
    out = os.path.join(args.run_dir, "metrics.json")
    with open(out, "w") as fh:
        json.dump(metrics, fh, indent=2)
    for k, v in metrics.items():
        print(f"{k}: {v}")
    print(f"wrote {out}")
    return 0


def cmd_regret_check(args):
    record = sx.load_record_csv(args.weights)
    if len(record) == 0:
        raise ConfigurationError(f"{args.weights}: no recorded updates")
    info = sx.check_regret(record, eta=args.eta)
    print(f"B={info['B']} G={info['G']:.6g} eta={info['eta']:.3g}")
    print(f"regret={info['regret']:.6g} bound={info['bound']:.6g} "
          f"-> {'PASS' if info['passed'] else 'FAIL'}")
    print(f"replay at eta*={info['eta_star']:.6g}: regret={info['regret_star']:.6g} "
          f"bound={info['bound_star']:.6g} "
          f"-> {'PASS' if info['passed_star'] else 'FAIL'}")
    return 0 if (info["passed"] and info["passed_star"]) else 2


def cmd_report(args):
    written = rpt.render_run(args.run_dir, args.out_dir)
    for path in written:
        print(f"wrote {path}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="pwpinn", add_help=True)
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("generate", help="write the reference solution CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="run the training pipeline")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a saved run")
    p.add_argument("--config", required=True)
    p.add_argument("--run-dir", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("regret-check", help="verify the regret bound")
    p.add_argument("--weights", required=True)
    p.add_argument("--eta", type=float, default=None)
    p.set_defaults(func=cmd_regret_check)

    p = sub.add_parser("report", help="render SVG charts")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        if err.code in (0, None):   # --help
            return 0
        sys.stderr.write(USAGE)
        return 1
    if not getattr(args, "func", None):
        sys.stderr.write(USAGE)
        return 1
    try:
        return args.func(args)
    except ConfigurationError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 1
    except (DivergenceError,) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 2
    except (UsageError, PwpinnError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


def entry():
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
