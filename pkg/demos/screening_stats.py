"""Show the subspace screening rule at work along the path.

At the default (provably safe) threshold the rule only removes a basis
direction when its coefficient bounds certify it is zero, so the
screened path reproduces the full path exactly. Raising epsilon by hand
trades that guarantee for smaller solves; the objective drift below
measures what the guarantee is worth.
"""

import numpy as np

from tracereg import GaussianSpec, compare, gen_gaussian, prepare

problem, _ = gen_gaussian(GaussianSpec(p=15, q=45, n=30, rank=2, seed=2))
weights, schedule, _ = prepare(problem, k=10)

for epsilon in (None, 1e-3, 1e-2):
    res = compare(problem, weights, schedule, epsilon=epsilon)
    label = "safe default" if epsilon is None else f"epsilon={epsilon:g}"
    print(f"--- {label} ---")
    print("lambda      kept       screened r/c   objective drift")
    for rec, drift in zip(res.screened.records, res.obj_mismatch):
        d1, d2 = rec.kept_dims
        print(
            f"{rec.lam:10.6f}  {d1:3d} x {d2:3d}  "
            f"{rec.screened_rows:4d} {rec.screened_cols:4d}      {drift:.2e}"
        )
    print(
        f"speedup {res.speedups[0]:.3f}, safety within 1e-4: {res.safety_ok}\n"
    )
