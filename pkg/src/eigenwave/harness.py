"""Experiment engine: end-to-end runs, metric tables, sweeps, and scaling.

Output tables follow a fixed CSV layout (UTF-8, LF line endings, eigenvalues
with six decimals, errors in scientific notation with six significant digits)
so that runs with identical configuration and seed produce byte-identical
files.  Wall-clock times are reported separately and never enter the
deterministic tables.
"""

from __future__ import annotations

import csv
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig
from .errors import ConfigError, InvariantError, NumericalError
from .eigensolve import (EigenSolveResult, SplitMix64, implicit_restart_solve,
                         power_iteration, simultaneous_iteration)
from .filters import SchemeKind, beta, beta_tilde_d
from .grid import BoundaryConditionSpec, build_grid
from .laplacian import DENSE_CAP, DiscreteLaplacian
from .reference import analytic_discrete_box, dense_reference
from .waveop import EigenWaveOperator, operator_for
from .wavesolve import LinearSolverSpec, SolverKind

EIGENPAIR_COLUMNS = ["j", "lambda", "lambda_true", "k", "mult",
                     "eig-err", "evect-err", "eig-res"]
SUMMARY_COLUMNS = ["num-eigs", "wave-solves", "steps-per-period",
                   "wave-solves-per-eig", "time-steps-per-eig",
                   "max-eig-err", "max-evect-err", "max-eig-res"]


@dataclass
class RunReport:
    rows: list
    summary: dict
    wall_time: float
    config: RunConfig
    result: EigenSolveResult = None

    def write(self, out_dir):
        os.makedirs(out_dir, exist_ok=True)
        write_eigenpairs_csv(os.path.join(out_dir, "eigenpairs.csv"), self.rows)
        write_summary_csv(os.path.join(out_dir, "summary.csv"), self.summary)


def _fmt_lambda(x):
    return f"{x:.6f}"


def _fmt_err(x):
    return f"{x:.5e}"


def write_eigenpairs_csv(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EIGENPAIR_COLUMNS)
        for r in rows:
            w.writerow([r["j"], _fmt_lambda(r["lambda"]),
                        _fmt_lambda(r["lambda_true"]), r["k"], r["mult"],
                        _fmt_err(r["eig-err"]), _fmt_err(r["evect-err"]),
                        _fmt_err(r["eig-res"])])


def write_summary_csv(path, summary):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        w.writerow([summary["num-eigs"], summary["wave-solves"],
                    f'{summary["steps-per-period"]:.6g}',
                    f'{summary["wave-solves-per-eig"]:.6g}',
                    f'{summary["time-steps-per-eig"]:.6g}',
                    _fmt_err(summary["max-eig-err"]),
                    _fmt_err(summary["max-evect-err"]),
                    _fmt_err(summary["max-eig-res"])])


def build_discretization(config):
    """Grid, boundary spec, and operator for a validated configuration."""
    gw = config.order // 2
    grid = build_grid(config.dim, config.extents, config.n_cells, gw)
    if config.bc == "dirichlet":
        bc = BoundaryConditionSpec.dirichlet(config.dim, config.c)
    else:
        bc = BoundaryConditionSpec.neumann(config.dim, config.c)
    return grid, bc, DiscreteLaplacian(grid, config.order, bc)


def _solver_spec(config, lap):
    kind = config.solver_kind
    if kind == "auto":
        if lap.n_active <= DENSE_CAP:
            kind = "direct"
        elif config.order == 2:
            kind = "multigrid"
        else:
            kind = "cg"
    return LinearSolverSpec(kind=SolverKind(kind), tol=config.solver_tol,
                            max_iter=config.solver_max_iter,
                            pre_smooth=config.pre_smooth,
                            post_smooth=config.post_smooth)


def build_operator(config, lap=None):
    if lap is None:
        _, _, lap = build_discretization(config)
    solver = None
    if config.scheme == SchemeKind.IMPLICIT:
        solver = _solver_spec(config, lap)
    return operator_for(lap, config.omega, n_periods=config.n_periods,
                        scheme=config.scheme, n_its=config.n_its,
                        cfl=config.cfl, solver=solver,
                        adjust_omega=config.adjust_omega)


def _run_eigensolver(config, op):
    if config.eigensolver == "arnoldi":
        return implicit_restart_solve(op, config.n_requested,
                                      n_max=config.n_max, tol=config.eig_tol,
                                      max_restarts=config.max_restarts,
                                      seed=config.seed)
    if config.eigensolver == "subspace":
        return simultaneous_iteration(op, config.n_max, config.n_requested,
                                      tol=config.eig_tol,
                                      max_sweeps=config.max_sweeps,
                                      seed=config.seed)
    # single dominant pair via power iteration
    rng = SplitMix64(config.seed)
    pr = power_iteration(op, rng.uniform(op.n), tol=config.eig_tol,
                         max_iters=config.max_sweeps)
    return EigenSolveResult(
        np.array([pr.beta]), pr.vector[:, None], np.array([pr.lam]),
        np.array([abs(pr.history[-1] - pr.history[-2])
                  if len(pr.history) > 1 else 0.0]),
        n_converged=1, converged=True, counters=op.counters(),
        diagnostics={"iterations": pr.iterations})


def build_reference(config, lap, lambda_need):
    """Reference spectrum covering at least ``lambda_need``."""
    if config.reference == "dense":
        return dense_reference(lap, cluster_rtol=config.cluster_rtol)
    if config.bc != "dirichlet":
        if lap.n_active <= DENSE_CAP:
            return dense_reference(lap, cluster_rtol=config.cluster_rtol)
        raise ConfigError("the closed-form reference covers Dirichlet boxes "
                          "only; use reference=dense on a smaller grid")
    return analytic_discrete_box(lap.grid, lap.order, lambda_need, c=config.c)


def compute_metrics(lambdas, vectors, lap, ref):
    """Per-pair accuracy rows against a reference spectrum.

    eig-err is the relative eigenvalue error against the nearest reference
    value; evect-err the max-norm distance from the (max-norm normalized)
    vector to its projection onto the matched cluster's eigenspace, relative
    to the projection's own max-norm; eig-res the relative residual of the
    original discrete eigenproblem.
    """
    if len(ref.lambdas) == 0:
        raise ConfigError("empty reference spectrum")
    rows = []
    for j, (lam, v) in enumerate(zip(lambdas, vectors.T)):
        k = ref.nearest(lam)
        lam_true = float(ref.lambdas[k])
        cluster = ref.cluster_of(k)
        eig_err = abs(lam - lam_true) / abs(lam_true) if lam_true else abs(lam)
        vhat = v / np.max(np.abs(v))
        if cluster.basis is not None:
            proj = cluster.basis @ (cluster.basis.T @ vhat)
            denom = np.max(np.abs(proj))
            evect_err = (float(np.max(np.abs(vhat - proj))) / denom
                         if denom > 0 else float("inf"))
        else:
            evect_err = float("nan")
        resid = lap.apply_packed(vhat) + lam * lam * vhat
        eig_res = float(np.max(np.abs(resid))) / (lam * lam) if lam else float("inf")
        rows.append({"j": j, "lambda": float(lam), "lambda_true": lam_true,
                     "k": k, "mult": cluster.multiplicity,
                     "eig-err": float(eig_err), "evect-err": float(evect_err),
                     "eig-res": float(eig_res)})
    return rows


def summarize(rows, counters, steps_per_period):
    n = len(rows)
    summary = {
        "num-eigs": n,
        "wave-solves": counters["wave_solves"],
        "steps-per-period": steps_per_period,
        "wave-solves-per-eig": counters["wave_solves"] / n if n else math.inf,
        "time-steps-per-eig": counters["time_steps"] / n if n else math.inf,
        "max-eig-err": max((r["eig-err"] for r in rows), default=0.0),
        "max-evect-err": max((r["evect-err"] for r in rows), default=0.0),
        "max-eig-res": max((r["eig-res"] for r in rows), default=0.0),
    }
    return summary


def run_case(config):
    """Build everything, solve, and assemble the accuracy report."""
    grid, bc, lap = build_discretization(config)
    op = build_operator(config, lap)
    t0 = time.perf_counter()
    result = _run_eigensolver(config, op)
    wall = time.perf_counter() - t0
    lam_max = float(np.max(result.lambdas)) if result.n_converged else config.omega
    ref = build_reference(config, lap, max(2.0 * config.omega, 1.25 * lam_max))
    rows = compute_metrics(result.lambdas, result.vectors, lap, ref)
    for r in rows:
        if r["eig-err"] > 1e-3:
            raise NumericalError(
                f"computed eigenvalue {r['lambda']:.6f} is not within 0.1% of "
                f"any reference eigenvalue; pair {r['j']} looks spurious")
    summary = summarize(rows, result.counters, op.filter.steps_per_period)
    for key, col in (("max-eig-err", "eig-err"), ("max-evect-err", "evect-err"),
                     ("max-eig-res", "eig-res")):
        col_max = max((r[col] for r in rows), default=0.0)
        if summary[key] != col_max:
            raise InvariantError(f"summary field {key} does not equal the "
                                 f"column maximum")
    return RunReport(rows, summary, wall, config, result)


SWEEP_AXES = {
    "n_its": lambda cfg, v: cfg.with_overrides(n_its=int(v)),
    "n_periods": lambda cfg, v: cfg.with_overrides(n_periods=int(v)),
    "n_requested": lambda cfg, v: cfg.with_overrides(n_requested=int(v),
                                                     n_arnoldi=0),
    "tolerance": lambda cfg, v: cfg.with_overrides(solver_tol=float(v)),
}


def study_sweep(axis, values, base_config):
    """One run per value of a study axis; failures are recorded, not fatal."""
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; expected one of "
                          f"{sorted(SWEEP_AXES)}")
    rows = []
    for v in values:
        row = {"value": v}
        try:
            report = run_case(SWEEP_AXES[axis](base_config, v))
            s = report.summary
            row.update({"num-eigs": s["num-eigs"],
                        "wave-solves": s["wave-solves"],
                        "time-steps-per-eig": s["time-steps-per-eig"],
                        "max-eig-err": s["max-eig-err"],
                        "max-evect-err": s["max-evect-err"],
                        "max-eig-res": s["max-eig-res"],
                        "status": "ok"})
        except (NumericalError, ConfigError) as exc:
            row.update({"status": f"failed: {type(exc).__name__}"})
        rows.append(row)
    return rows


def write_sweep_csv(path, axis, rows):
    cols = ["value", "num-eigs", "wave-solves", "time-steps-per-eig",
            "max-eig-err", "max-evect-err", "max-eig-res", "status"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"{axis}"] + cols[1:])
        for r in rows:
            out = [r["value"]]
            for c in cols[1:]:
                if c not in r:
                    out.append("")
                elif c in ("max-eig-err", "max-evect-err", "max-eig-res"):
                    out.append(_fmt_err(r[c]))
                elif c == "time-steps-per-eig":
                    out.append(f"{r[c]:.6g}")
                else:
                    out.append(r[c])
            w.writerow(out)


def scaling_study(base_config, levels, repeats=3, jitter_limit=0.2):
    """Timed runs over a grid refinement sequence (median of ``repeats``).

    Reports, per level: total points, converged pairs, wave solves, mean
    linear iterations per implicit solve, median wall time, the wall-time
    ratio against the previous level, and wall time per point normalized to
    the first level.  A level is flagged when its repeated timings spread by
    more than ``jitter_limit`` relative.
    """
    rows = []
    prev_time = None
    base_per_point = None
    for n in levels:
        cfg = base_config.with_overrides(n_cells=(int(n),))
        times = []
        report = None
        for _ in range(repeats):
            t0 = time.perf_counter()
            report = run_case(cfg)
            times.append(time.perf_counter() - t0)
        med = float(np.median(times))
        jitter = (max(times) - min(times)) / med if med > 0 else 0.0
        op_counters = report.result.counters
        n_points = int(np.prod([m + 1 for m in cfg.n_cells]))
        mean_iters = (op_counters["linear_iterations"]
                      / max(op_counters["wave_solves"], 1)
                      / max(report.config.n_periods * report.config.n_its, 1))
        per_point = med / n_points
        if base_per_point is None:
            base_per_point = per_point
        row = {"n": int(n), "points": n_points,
               "num-eigs": report.summary["num-eigs"],
               "wave-solves": report.summary["wave-solves"],
               "mean-linear-iterations": mean_iters,
               "wall-time": med,
               "cpu-ratio": (med / prev_time) if prev_time else float("nan"),
               "cpu-per-point-normalized": per_point / base_per_point,
               "jitter-flagged": jitter > jitter_limit}
        rows.append(row)
        prev_time = med
    return rows


def write_scaling_csv(path, rows):
    cols = ["n", "points", "num-eigs", "wave-solves", "mean-linear-iterations",
            "wall-time", "cpu-ratio", "cpu-per-point-normalized",
            "jitter-flagged"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([r["n"], r["points"], r["num-eigs"], r["wave-solves"],
                        f'{r["mean-linear-iterations"]:.3f}',
                        f'{r["wall-time"]:.4f}',
                        f'{r["cpu-ratio"]:.3f}',
                        f'{r["cpu-per-point-normalized"]:.3f}',
                        int(r["jitter-flagged"])])


def cr_estimate(beta_r, n_periods=1):
    """Predicted subspace-iteration rate for a requested filter level.

    Solves beta(1 + delta) = beta_r on the first descending branch of the
    filter (requires beta_r in [0.7, 1)), then returns
    beta(1 + 2 delta) / beta(1 + delta): with twice as many block vectors as
    requested pairs, the convergence of the slowest requested pair is governed
    by the filter value one bandwidth further out.
    """
    if not 0.7 <= beta_r < 1.0:
        raise ValueError(f"beta_r must lie in [0.7, 1), got {beta_r}")
    step = 1e-3 / n_periods
    lo = 0.0
    hi = None
    d = step
    while d < 1.0 / n_periods:
        if beta(1.0 + d, 1.0, n_periods) < beta_r:
            hi = d
            lo = d - step
            break
        d += step
    if hi is None:
        raise ValueError(f"no crossing of beta = {beta_r} on the descending branch")
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if beta(1.0 + mid, 1.0, n_periods) > beta_r:
            lo = mid
        else:
            hi = mid
    delta = 0.5 * (lo + hi)
    return beta(1.0 + 2.0 * delta, 1.0, n_periods) / beta(1.0 + delta, 1.0, n_periods)


def measured_cr(tol, wave_solves):
    """Observed per-product convergence rate: tol ** (1 / wave_solves)."""
    if not 0 < tol < 1 or wave_solves < 1:
        raise ValueError("need 0 < tol < 1 and at least one wave solve")
    return tol ** (1.0 / wave_solves)


def emit_filter_curve(spec, scheme, lambdas):
    """Filter samples (lambda, lambda/omega, beta, beta_tilde_d) as rows."""
    lambdas = np.asarray(lambdas, dtype=float)
    cont = beta(lambdas, spec.omega, spec.n_periods)
    disc = beta_tilde_d(lambdas, spec, scheme)
    return [{"lambda": float(l), "lambda_over_omega": float(l / spec.omega),
             "beta": float(b), "beta_tilde_d": float(bd)}
            for l, b, bd in zip(lambdas, np.atleast_1d(cont), np.atleast_1d(disc))]


def write_filter_csv(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lambda", "lambda_over_omega", "beta", "beta_tilde_d"])
        for r in rows:
            w.writerow([f'{r["lambda"]:.8f}', f'{r["lambda_over_omega"]:.8f}',
                        f'{r["beta"]:.12e}', f'{r["beta_tilde_d"]:.12e}'])
