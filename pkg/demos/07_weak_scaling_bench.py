"""Weak-scaling benchmark: the locality story in numbers and plots.

Weak scaling grows the problem with the worker count so the work per
worker stays constant; the interesting question is how the *communication*
per worker grows.  Because the quadtree assigns whole subtrees to owners
and the scheduler steals breadth-first, most traffic stays within a
worker's own subtree and the bytes received per worker grow far slower
than the worker count.

This runs the banded case at desk scale in simulate mode, prints the
per-doubling growth ratios, and writes the same CSV and SVG panels the
`bench` command produces.
"""

from pathlib import Path

from quadmat.bench import BenchConfig, emit_csv, emit_plots, run_bench
from quadmat.generators import ExperimentCase

out_dir = Path(__file__).parent / "out"
out_dir.mkdir(exist_ok=True)

records = []
means = {}
for workers in (2, 4, 8, 16):
    config = BenchConfig(
        case=ExperimentCase("banded", 2048 * workers, 64),
        n_workers=workers,
        leaf_dim=256,
        block_size=64,
        cache_capacity_bytes=8 << 20,
        mode="simulate",
        repeats=4,
        seed=0,
    )
    batch = run_bench(config)
    records.extend(batch)
    means[workers] = sum(r.bytes_mean for r in batch) / len(batch)
    print(f"P={workers:2d}  n={2048 * workers:6d}  "
          f"mean bytes/worker = {means[workers]:12.0f}")

print()
for low, high in ((2, 4), (4, 8), (8, 16)):
    print(f"bytes growth P={low} -> P={high}: x{means[high] / means[low]:.3f} "
          f"(work per worker is constant)")

csv_path = out_dir / "weak_scaling.csv"
emit_csv(records, csv_path)
paths = emit_plots(records, out_dir)
print(f"\nwrote {csv_path}")
for p in paths:
    print(f"wrote {p}")
