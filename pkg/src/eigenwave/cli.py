"""Command-line interface.

Subcommands:

    solve         run one case and write summary.csv / eigenpairs.csv
    reference     write the reference spectrum (lambda, multiplicity)
    filter-curve  sample the continuous and discrete filter functions
    study         sweep one parameter axis and write sweep.csv
    scaling       timed refinement study, writes scaling.csv

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 internal invariant violation.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import harness
from .config import parse_config
from .errors import EigenWaveError
from .filters import SchemeKind


def _add_common(p):
    p.add_argument("--config", required=True, help="path to the run config file")
    p.add_argument("--out-dir", default=None, help="output directory "
                   "(default: the config's output section, or ./out)")
    p.add_argument("--seed", type=int, default=None,
                   help="override the configured random seed")


def _load(args):
    cfg = parse_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_overrides(seed=args.seed)
    out_dir = args.out_dir if args.out_dir is not None else cfg.out_dir
    os.makedirs(out_dir, exist_ok=True)
    return cfg, out_dir


def _cmd_solve(args):
    cfg, out_dir = _load(args)
    report = harness.run_case(cfg)
    report.write(out_dir)
    s = report.summary
    print(f"converged {s['num-eigs']} eigenpairs in {s['wave-solves']} wave-solves "
          f"({s['wave-solves-per-eig']:.2f} per pair, "
          f"{s['time-steps-per-eig']:.1f} time-steps per pair)")
    print(f"max eig-err {s['max-eig-err']:.3e}  max evect-err "
          f"{s['max-evect-err']:.3e}  max eig-res {s['max-eig-res']:.3e}")
    print(f"wall time {report.wall_time:.2f} s; tables in {out_dir}")
    return 0


def _cmd_reference(args):
    cfg, out_dir = _load(args)
    _, _, lap = harness.build_discretization(cfg)
    ref = harness.build_reference(cfg, lap, 2.0 * cfg.omega)
    path = os.path.join(out_dir, "reference.csv")
    ref.to_csv(path)
    print(f"{len(ref.clusters)} distinct eigenvalues "
          f"({len(ref.lambdas)} counting multiplicity) written to {path}")
    return 0


def _cmd_filter_curve(args):
    cfg, out_dir = _load(args)
    op = harness.build_operator(cfg)
    lam_max = args.lambda_max if args.lambda_max else 2.0 * cfg.omega
    lams = np.linspace(0.0, lam_max, args.samples)
    rows = harness.emit_filter_curve(op.filter, cfg.scheme, lams)
    path = os.path.join(out_dir, "filter.csv")
    harness.write_filter_csv(path, rows)
    print(f"{len(rows)} filter samples written to {path}")
    return 0


def _cmd_study(args):
    cfg, out_dir = _load(args)
    values = [float(v) for v in args.values.split(",") if v.strip()]
    rows = harness.study_sweep(args.axis, values, cfg)
    path = os.path.join(out_dir, "sweep.csv")
    harness.write_sweep_csv(path, args.axis, rows)
    failed = sum(1 for r in rows if r.get("status") != "ok")
    print(f"{len(rows)} sweep points ({failed} failed) written to {path}")
    return 0


def _cmd_scaling(args):
    cfg, out_dir = _load(args)
    levels = [int(v) for v in args.levels.split(",") if v.strip()]
    rows = harness.scaling_study(cfg, levels, repeats=args.repeats)
    path = os.path.join(out_dir, "scaling.csv")
    harness.write_scaling_csv(path, rows)
    for r in rows:
        flag = "  (timing jitter)" if r["jitter-flagged"] else ""
        print(f"n={r['n']:>5}  points={r['points']:>9}  "
              f"wave-solves={r['wave-solves']:>5}  "
              f"cycles/solve={r['mean-linear-iterations']:.2f}  "
              f"t={r['wall-time']:.3f}s  ratio={r['cpu-ratio']:.2f}{flag}")
    print(f"table written to {path}")
    return 0


def make_parser():
    parser = argparse.ArgumentParser(
        prog="eigenwave",
        description="Eigenpairs of discretized Laplacians by time-filtered "
                    "wave solves")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run one case")
    _add_common(p)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("reference", help="write the reference spectrum")
    _add_common(p)
    p.set_defaults(func=_cmd_reference)

    p = sub.add_parser("filter-curve", help="sample the filter functions")
    _add_common(p)
    p.add_argument("--lambda-max", type=float, default=None)
    p.add_argument("--samples", type=int, default=1001)
    p.set_defaults(func=_cmd_filter_curve)

    p = sub.add_parser("study", help="sweep one parameter axis")
    _add_common(p)
    p.add_argument("--axis", required=True,
                   choices=sorted(harness.SWEEP_AXES))
    p.add_argument("--values", required=True,
                   help="comma-separated list of axis values")
    p.set_defaults(func=_cmd_study)

    p = sub.add_parser("scaling", help="timed grid-refinement study")
    _add_common(p)
    p.add_argument("--levels", required=True,
                   help="comma-separated list of cells-per-axis values")
    p.add_argument("--repeats", type=int, default=3)
    p.set_defaults(func=_cmd_scaling)
    return parser


def main(argv=None):
    args = make_parser().parse_args(argv)
    try:
        code = args.func(args)
    except EigenWaveError as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = exc.exit_code
    return code


if __name__ == "__main__":
    sys.exit(main())
