"""Command-line driver: ``minres-wp run --experiment exp1 --method wp ...``."""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .adaptivity import HISTORY_COLUMNS, AdaptConfig, LoopRecord, run_adaptive
from .assembly import discretize
from .kacanov import TRACE_COLUMNS, RelaxationInterval, run_kacanov
from .linsolve import SingularSystemError
from .mesh import dorfler_mark, refine, refine_uniform
from .problems import (
    ExperimentId,
    eriksson_exact,
    galerkin_solve,
    initial_mesh,
    l2_error,
    line_profile,
    make_problem,
    minres_l2_solve,
    staged_epsilon,
)
from .spaces import build_space

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_BASELINE_FAILURE = 3
EXIT_WP_FAILURE = 4

PROFILE_SAMPLES = 201


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.12e" % float(value)
    return str(value)


def write_csv(path: Path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(c, math.nan)) for c in columns])


def _zeta(text: str) -> RelaxationInterval:
    try:
        return RelaxationInterval.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad interval {text!r}: expected lo:hi with 0 < lo <= hi") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="minres-wp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one experiment and write CSV outputs")
    run.add_argument("--experiment", choices=["exp1", "exp2", "eriksson"], required=True)
    run.add_argument("--eps", type=float, default=None, help="diffusion for eriksson")
    run.add_argument("--method", choices=["wp", "galerkin", "minres_l2"], default="wp")
    run.add_argument("--p", type=float, default=100.0)
    run.add_argument("--zeta", type=_zeta, default=RelaxationInterval(1e-2, 1e2), help="lo:hi")
    run.add_argument("--refine", choices=["none", "uniform", "adaptive"], default="none")
    run.add_argument("--strategy", choices=["controller", "fixed"], default="controller",
                     help="wp with refinement: indicator-driven loop or fixed interval")
    run.add_argument("--theta", type=float, default=0.5)
    run.add_argument("--w", type=float, default=1.0)
    run.add_argument("--max-dofs", type=int, default=10_000)
    run.add_argument("--inner-iters", type=int, default=None,
                     help="Kacanov steps per mesh (fixed strategy), per visit (controller) "
                          "or the iteration cap without refinement")
    run.add_argument("--max-total-iters", type=int, default=500)
    run.add_argument("--tol", type=float, default=1e-10, help="relative energy decrement")
    run.add_argument("--staged-eps", action="store_true")
    run.add_argument("--mesh-n", type=int, default=None)
    run.add_argument("--seed", type=int, default=0, help="reserved; no algorithm is random")
    run.add_argument("--out", type=Path, required=True)
    return parser


def _validate(args, parser) -> ExperimentId:
    if args.experiment == "eriksson":
        if args.eps is None and not args.staged_eps:
            parser.error("--experiment eriksson needs --eps")
        eps = args.eps if args.eps is not None else staged_epsilon(0)
        if not eps > 0:
            parser.error("--eps must be positive")
    else:
        if args.eps is not None:
            parser.error(f"--eps is not used by {args.experiment}")
        if args.staged_eps:
            parser.error("--staged-eps requires --experiment eriksson")
        eps = None
    if args.method == "wp" and args.p < 2:
        parser.error("--p must be >= 2 for the wp method")
    if args.staged_eps and args.refine == "none":
        parser.error("--staged-eps requires --refine uniform or adaptive")
    if not 0.0 < args.theta <= 1.0:
        parser.error("--theta must lie in (0, 1]")
    if not args.w > 0:
        parser.error("--w must be positive")
    if args.mesh_n is not None and args.mesh_n < 1:
        parser.error("--mesh-n must be positive")
    return ExperimentId(args.experiment, eps)


def _problem_on(exp: ExperimentId, args, mesh):
    prob = make_problem(exp)
    if args.staged_eps:
        eps = staged_epsilon(mesh.n_vertices)
        prob = replace(prob, epsilon=eps, exact=eriksson_exact(eps))
    return prob


def _write_profiles(out: Path, u) -> None:
    if u is None:
        return
    if u.space.mesh.dim == 1:
        write_csv(out / "profile_x.csv", ("coord", "value"),
                  [{"coord": c, "value": v} for c, v in line_profile(u, "x", 0.0, PROFILE_SAMPLES)])
        return
    for name, axis, value in (("profile_x.csv", "x", 0.5), ("profile_y.csv", "y", 0.75)):
        write_csv(out / name, ("coord", "value"),
                  [{"coord": c, "value": v} for c, v in line_profile(u, axis, value, PROFILE_SAMPLES)])


def _run_wp(exp, args, mesh, out: Path) -> tuple[int, str]:
    prob = make_problem(exp)
    if args.refine == "none":
        trace: list = []
        cap = args.inner_iters or 50
        state = run_kacanov(discretize(mesh, prob), args.zeta, args.p, max_iters=cap,
                            rel_tol=args.tol, trace=trace)
        write_csv(out / "iterations.csv", TRACE_COLUMNS, trace)
        err = l2_error(state.u, prob.exact) if prob.exact is not None else math.nan
        history = []
        for row in trace:
            history.append({"step": row["n"] - 1, "action": "iterate", "ndof": state.disc.U.ndof,
                            "zeta_lo": state.zeta.lo, "zeta_hi": state.zeta.hi,
                            "J_zeta": row["J_zeta"], "eta_zp2": row["eta_zp2"],
                            "eta_zm2": row["eta_zm2"], "eta_kac2": row["eta_kac2"],
                            "eta_h_pprime": row["eta_h_pprime"], "residual": row["residual_estimate"],
                            "l2_error": math.nan, "epsilon": prob.epsilon, "status": "ok"})
        history[-1]["action"] = "stop"
        history[-1]["l2_error"] = err
        write_csv(out / "history.csv", HISTORY_COLUMNS + ("status",), history)
        _write_profiles(out, state.u)
        return EXIT_OK, ""

    fixed = args.strategy == "fixed"
    inner = args.inner_iters or (2 if fixed else 1)
    cfg = AdaptConfig(w=args.w, theta=args.theta, zeta0=tuple(args.zeta), max_dofs=args.max_dofs,
                      max_total_iters=args.max_total_iters, inner_iters=inner, mode=args.refine,
                      fixed_zeta=tuple(args.zeta) if fixed else None, p=args.p,
                      staged=args.staged_eps)
    records: list[LoopRecord] = []
    try:
        hist = run_adaptive(prob, cfg, mesh, on_record=records.append)
    except SingularSystemError as exc:
        rows = [r.as_row() for r in records]
        rows.append({"step": len(rows), "action": "stop", "status": "solver_failure"})
        write_csv(out / "history.csv", HISTORY_COLUMNS + ("status",), rows)
        return EXIT_WP_FAILURE, f"wp solver failure: {exc}"
    rows = [r.as_row() for r in hist]
    write_csv(out / "history.csv", HISTORY_COLUMNS + ("status",), rows)
    iters = [{"n": r["step"], "J_zeta": r["J_zeta"], "eta_zp2": r["eta_zp2"], "eta_zm2": r["eta_zm2"],
              "eta_kac2": r["eta_kac2"], "eta_h_pprime": r["eta_h_pprime"],
              "residual_estimate": r["residual"]} for r in rows]
    write_csv(out / "iterations.csv", TRACE_COLUMNS, iters)
    _write_profiles(out, hist.state.u)
    return EXIT_OK, ""


def _run_baseline(exp, args, mesh, out: Path) -> tuple[int, str]:
    rows, u, code, msg = [], None, EXIT_OK, ""
    step = 0
    while True:
        prob = _problem_on(exp, args, mesh)
        U = build_space(mesh, 1, prob.dirichlet_parts)
        if args.method == "galerkin":
            res = galerkin_solve(prob, U)
        else:
            V = build_space(mesh, 2, [(label, 0.0) for label, _ in prob.dirichlet_parts])
            res = minres_l2_solve(prob, U, V)
        row = {"step": step, "action": "refine", "ndof": U.ndof, "zeta_lo": math.nan,
               "zeta_hi": math.nan, "J_zeta": math.nan, "eta_zp2": math.nan, "eta_zm2": math.nan,
               "eta_kac2": math.nan, "eta_h_pprime": math.nan, "residual": math.nan,
               "l2_error": math.nan, "epsilon": prob.epsilon, "status": res.status}
        rows.append(row)
        if res.status != "ok":
            row["action"] = "stop"
            code, msg = EXIT_BASELINE_FAILURE, f"{args.method} solver failure at ndof={U.ndof}: {res.message}"
            break
        u = res.u
        row["residual"] = float(np.sqrt(res.indicators.sum()))
        if prob.exact is not None:
            row["l2_error"] = l2_error(u, prob.exact)
        if args.refine == "none":
            row["action"] = "stop"
            break
        if args.refine == "uniform":
            new = refine_uniform(mesh)
        else:
            new = refine(mesh, dorfler_mark(res.indicators, args.theta))
        if new.n_vertices > args.max_dofs:
            row["action"] = "stop"
            break
        mesh, step = new, step + 1
    write_csv(out / "history.csv", HISTORY_COLUMNS + ("status",), rows)
    write_csv(out / "iterations.csv", TRACE_COLUMNS, [])
    _write_profiles(out, u)
    return code, msg


def _manifest(args, exp: ExperimentId) -> dict:
    meta = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()}
    meta["zeta"] = f"{args.zeta.lo!r}:{args.zeta.hi!r}"
    meta["epsilon"] = exp.epsilon
    return meta


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    exp = _validate(args, parser)
    n = args.mesh_n or (32 if exp.dim == 1 else 16)
    mesh = initial_mesh(exp, n)
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "meta.json", "w") as fh:
        json.dump(_manifest(args, exp), fh, indent=1, sort_keys=True)
        fh.write("\n")
    try:
        if args.method == "wp":
            code, msg = _run_wp(exp, args, mesh, out)
        else:
            code, msg = _run_baseline(exp, args, mesh, out)
    except SingularSystemError as exc:
        code, msg = EXIT_WP_FAILURE, f"solver failure: {exc}"
    if code != EXIT_OK:
        print(f"minres-wp: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
