"""Small timing comparison between the full and screened paths.

Mirrors the bench CLI subcommand: every spec is run reps times, both
paths are timed on identical problems, and the speedup is their ratio.
Dimensions here are kept small so the demo finishes in seconds; pass
bigger specs through the CLI for real measurements.
"""

from tracereg import GaussianSpec, ShapeSpec, bench, report

specs = [
    GaussianSpec(p=10, q=20, n=15, rank=2, seed=0),
    GaussianSpec(p=15, q=15, n=20, rank=2, seed=0),
    ShapeSpec(name="square", size=16, n=10, seed=0),
]

records = bench(specs, k=5, reps=3, warm_start=True)
print(report([r.to_dict() for r in records], fmt="markdown"))
