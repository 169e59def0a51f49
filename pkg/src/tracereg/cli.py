"""Command line front end.

Exit codes: 0 success, 2 solver failed to converge, 3 screened/full
objective mismatch beyond tolerance, 4 bad input.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

import numpy as np

from .admm import AdmmConfig, make_instance, precompute, solve
from .harness import (
    GaussianSpec,
    ShapeSpec,
    bench,
    gen_gaussian,
    gen_shape,
    load_problem,
    prepare,
    report,
    save_problem,
)
from .model import compute_weights, lambda_max, min_norm_least_squares, GramFactor
from .path import SAFETY_OBJECTIVE_RTOL, LambdaSchedule, full_path, screened_path
from .prox import svd

EXIT_OK = 0
EXIT_NO_CONVERGENCE = 2
EXIT_SAFETY = 3
EXIT_INPUT = 4


def _add_solver_flags(sub):
    sub.add_argument("--gamma", type=float, default=1.0, help="weight exponent in (0, 1]")
    sub.add_argument("--sigma", type=float, default=1.0, help="augmented Lagrangian parameter")
    sub.add_argument("--tau", type=float, default=1.618, help="dual step size")
    sub.add_argument("--tol", type=float, default=1e-6, help="convergence tolerance")
    sub.add_argument("--max-iter", type=int, default=5000, help="iteration cap per solve")


def _add_grid_flags(sub, k_default=20):
    sub.add_argument("--k", type=int, default=k_default, help="number of grid points")
    sub.add_argument("--ratio", type=float, default=0.616, help="grid decay ratio")


def _config(args):
    return AdmmConfig(
        sigma=args.sigma, tau=args.tau,
        tol_primal=args.tol, tol_dual=args.tol,
        max_iter=args.max_iter,
    )


def _emit(payload, out):
    text = json.dumps(payload, indent=2) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _record_dict(rec):
    return {
        "lambda": rec.lam,
        "objective": rec.solution.objective,
        "rank": rec.rank,
        "iters": rec.iters,
        "converged": rec.converged,
        "time_ms": rec.solve_time_ms,
        "screen_time_ms": rec.screen_time_ms,
        "screened_rows": rec.screened_rows,
        "screened_cols": rec.screened_cols,
        "kept_dims": list(rec.kept_dims),
    }


def cmd_generate(args):
    if args.kind == "gaussian":
        spec = GaussianSpec(
            p=args.p, q=args.q, n=args.n,
            rank=args.rank, noise_std=args.noise_std, seed=args.seed,
        )
        problem, b_true = gen_gaussian(spec)
    else:
        spec = ShapeSpec(
            name=args.shape, n=args.n, size=args.size,
            noise_std=args.noise_std, seed=args.seed,
        )
        problem, b_true = gen_shape(spec)
    manifest = save_problem(problem, args.out)
    np.savetxt(f"{args.out}/b_true.csv", b_true, fmt="%.17g", delimiter=",")
    meta = dataclasses.asdict(spec)
    meta["kind"] = args.kind
    meta["manifest"] = manifest
    with open(f"{args.out}/meta.json", "w") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")
    sys.stdout.write(manifest + "\n")
    return EXIT_OK


def _resolve_lambda(args, problem, weights):
    lmax = lambda_max(problem, weights)
    if args.lam is not None:
        return args.lam
    return args.lambda_ratio * lmax


def cmd_solve(args):
    problem = load_problem(args.manifest)
    weights = compute_weights(
        min_norm_least_squares(problem), args.gamma, problem.n
    )
    lam = _resolve_lambda(args, problem, weights)
    instance = make_instance(problem, weights, lam)
    solution = solve(instance, _config(args), precompute(instance))
    payload = {
        "lambda": lam,
        "objective": solution.objective,
        "rank": int(svd(solution.B).rank),
        "iters": solution.iters,
        "converged": solution.converged,
        "time_ms": solution.solve_time_ms,
        "primal_residual": solution.primal_residual,
        "dual_residual": solution.dual_residual,
        "B": solution.B.tolist(),
    }
    _emit(payload, args.out)
    return EXIT_OK if solution.converged else EXIT_NO_CONVERGENCE


def cmd_path(args):
    problem = load_problem(args.manifest)
    weights, schedule, _ = prepare(problem, gamma=args.gamma, k=args.k, ratio=args.ratio)
    if args.lambda_max_ratio != 1.0:
        schedule = LambdaSchedule(
            lambda_max=schedule.lambda_max * args.lambda_max_ratio,
            k=args.k, ratio=args.ratio,
        )
    config = _config(args)

    results = {}
    if args.mode in ("full", "both"):
        results["full"] = full_path(problem, weights, schedule, config,
                                    warm_start=args.warm_start)
    if args.mode in ("screened", "both"):
        results["screened"] = screened_path(problem, weights, schedule, config,
                                            epsilon=args.epsilon,
                                            warm_start=args.warm_start)

    primary = results.get("screened") or results["full"]
    payload = {"mode": args.mode,
               "records": [_record_dict(r) for r in primary.records]}
    totals = {}
    if "full" in results:
        totals["T_f_ms"] = results["full"].total_ms
    if "screened" in results:
        totals["T_s_ms"] = results["screened"].total_ms
    if len(results) == 2:
        totals["speedup"] = totals["T_f_ms"] / totals["T_s_ms"]
        mismatch = np.max(
            np.abs(results["screened"].objectives() - results["full"].objectives())
            / np.maximum(np.abs(results["full"].objectives()), 1e-300)
        )
        totals["objective_mismatch"] = float(mismatch)
    payload["totals"] = totals
    _emit(payload, args.out)

    if not all(r.converged for res in results.values() for r in res.records):
        return EXIT_NO_CONVERGENCE
    if len(results) == 2 and totals["objective_mismatch"] > SAFETY_OBJECTIVE_RTOL:
        return EXIT_SAFETY
    return EXIT_OK


def cmd_screen_stats(args):
    problem = load_problem(args.manifest)
    weights, schedule, _ = prepare(problem, gamma=args.gamma, k=args.k, ratio=args.ratio)
    result = screened_path(problem, weights, schedule, _config(args),
                           epsilon=args.epsilon)
    payload = {
        "lambdas": [
            {
                "lambda": r.lam,
                "screened_rows": r.screened_rows,
                "screened_cols": r.screened_cols,
                "kept_dims": list(r.kept_dims),
            }
            for r in result.records
        ]
    }
    _emit(payload, args.out)
    return EXIT_OK if all(r.converged for r in result.records) else EXIT_NO_CONVERGENCE


def _bench_specs(args):
    if args.spec_file:
        with open(args.spec_file) as fh:
            raw = json.load(fh)
        specs = []
        for entry in raw:
            kind = entry.pop("kind", "gaussian")
            entry.setdefault("seed", args.seed)
            specs.append(ShapeSpec(**entry) if kind == "shape" else GaussianSpec(**entry))
        return specs
    if args.kind == "shape":
        return [ShapeSpec(name=args.shape, n=args.n, size=args.size,
                          noise_std=args.noise_std, seed=args.seed)]
    return [GaussianSpec(p=args.p, q=args.q, n=args.n, rank=args.rank,
                         noise_std=args.noise_std, seed=args.seed)]


def cmd_bench(args):
    specs = _bench_specs(args)
    records = bench(specs, k=args.k, ratio=args.ratio, reps=args.reps,
                    config=_config(args), gamma=args.gamma, epsilon=args.epsilon,
                    warm_start=args.warm_start)
    _emit([r.to_dict() for r in records], args.out)
    if not all(r.converged for r in records):
        return EXIT_NO_CONVERGENCE
    if not all(r.safety_ok for r in records):
        return EXIT_SAFETY
    return EXIT_OK


def cmd_report(args):
    with open(args.records) as fh:
        records = json.load(fh)
    text = report(records, fmt=args.format)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tracereg",
        description="Adaptive nuclear norm trace regression with safe screening.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    gen = subs.add_parser("generate", help="write a synthetic problem to disk")
    gen.add_argument("--kind", choices=("gaussian", "shape"), default="gaussian")
    gen.add_argument("--p", type=int, default=15)
    gen.add_argument("--q", type=int, default=45)
    gen.add_argument("--n", type=int, default=30)
    gen.add_argument("--rank", type=int, default=2)
    gen.add_argument("--shape", default="cross")
    gen.add_argument("--size", type=int, default=64)
    gen.add_argument("--noise-std", type=float, default=0.1)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="output directory")
    gen.set_defaults(func=cmd_generate)

    sol = subs.add_parser("solve", help="solve at a single penalty level")
    sol.add_argument("--manifest", required=True)
    group = sol.add_mutually_exclusive_group()
    group.add_argument("--lam", type=float, default=None, help="penalty level")
    group.add_argument("--lambda-ratio", type=float, default=0.5,
                       help="penalty as a fraction of the zero threshold")
    _add_solver_flags(sol)
    sol.add_argument("--out", default=None)
    sol.set_defaults(func=cmd_solve)

    pat = subs.add_parser("path", help="solve along a geometric grid")
    pat.add_argument("--manifest", required=True)
    pat.add_argument("--mode", choices=("full", "screened", "both"), default="both")
    pat.add_argument("--lambda-max-ratio", type=float, default=1.0,
                     help="scale the grid anchor")
    pat.add_argument("--warm-start", action="store_true")
    pat.add_argument("--epsilon", type=float, default=None,
                     help="screening threshold override")
    _add_grid_flags(pat)
    _add_solver_flags(pat)
    pat.add_argument("--out", default=None)
    pat.set_defaults(func=cmd_path)

    ben = subs.add_parser("bench", help="timing comparison, full vs screened")
    ben.add_argument("--spec-file", default=None,
                     help="JSON list of generator specs")
    ben.add_argument("--kind", choices=("gaussian", "shape"), default="gaussian")
    ben.add_argument("--p", type=int, default=15)
    ben.add_argument("--q", type=int, default=45)
    ben.add_argument("--n", type=int, default=30)
    ben.add_argument("--rank", type=int, default=2)
    ben.add_argument("--shape", default="cross")
    ben.add_argument("--size", type=int, default=64)
    ben.add_argument("--noise-std", type=float, default=0.1)
    ben.add_argument("--seed", type=int, default=0)
    ben.add_argument("--reps", type=int, default=10)
    ben.add_argument("--k", type=int, default=None)
    ben.add_argument("--ratio", type=float, default=0.616)
    ben.add_argument("--epsilon", type=float, default=None)
    ben.add_argument("--warm-start", action="store_true")
    _add_solver_flags(ben)
    ben.add_argument("--out", default=None)
    ben.set_defaults(func=cmd_bench)

    scr = subs.add_parser("screen-stats", help="per-level screening dimensions")
    scr.add_argument("--manifest", required=True)
    scr.add_argument("--epsilon", type=float, default=None)
    _add_grid_flags(scr)
    _add_solver_flags(scr)
    scr.add_argument("--out", default=None)
    scr.set_defaults(func=cmd_screen_stats)

    rep = subs.add_parser("report", help="format bench output")
    rep.add_argument("--records", required=True, help="JSON written by bench")
    rep.add_argument("--format", choices=("json", "csv", "markdown"),
                     default="markdown")
    rep.add_argument("--out", default=None)
    rep.set_defaults(func=cmd_report)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as err:
        sys.stderr.write(f"error: {err}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
