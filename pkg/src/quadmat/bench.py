"""Benchmark harness: run experiment cases, emit CSV and vector plots.

One benchmark point = generate the case matrix, then time one regular
matrix-matrix multiply on a fresh engine, ``repeats`` times.  Each repeat
yields one record carrying the wall time, the oracle flop count (never a
runtime measurement), and per-worker communication/task statistics
(min/mean/max across workers).  Plots show, per case, the mean across
repeats as a solid line with min/max as dashed lines, one panel each for
wall time, efficiency against a configured peak rate, and bytes received
per worker.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, fields

import psutil
from threadpoolctl import threadpool_limits

from .errors import ConfigurationError, SizingError
from .generators import ExperimentCase, flop_count_exact, generate, pattern_nnz
from .ops import MultiplyVariant, multiply_spec
from .session import MatrixSession

CSV_VERSION = "quadmat-bench-csv v1"

_MODES = {"simulate": "simulate", "shared_memory": "threaded"}


@dataclass(frozen=True)
class BenchConfig:
    case: ExperimentCase
    n_workers: int = 4
    leaf_dim: int = 256
    block_size: int = 64
    cache_capacity_bytes: int = 64 << 20
    mode: str = "simulate"
    repeats: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.repeats < 1:
            raise ConfigurationError("repeats must be >= 1")
        if min(self.n_workers, self.leaf_dim, self.block_size,
               self.cache_capacity_bytes) < 1:
            raise ConfigurationError("all sizes must be positive")
        if self.mode not in _MODES:
            raise ConfigurationError(
                f"mode must be one of {sorted(_MODES)}, got {self.mode!r}"
            )


@dataclass(frozen=True)
class BenchRecord:
    case_id: str
    n: int
    n_workers: int
    repeat: int
    wall_seconds: float
    flops: int
    efficiency: float
    bytes_min: int
    bytes_mean: float
    bytes_max: int
    tasks_min: int
    tasks_mean: float
    tasks_max: int


_INT_FIELDS = {"n", "n_workers", "repeat", "flops", "bytes_min", "bytes_max",
               "tasks_min", "tasks_max"}


def case_id(case: ExperimentCase) -> str:
    return f"{case.family}-n{case.n}"


def _check_memory(case: ExperimentCase, n_workers: int):
    nnz_in = pattern_nnz(case)
    # Input tree + product tree (band roughly doubles) + transient chunks.
    est = 8 * (3 * nnz_in + 2 * pattern_nnz(
        ExperimentCase("banded", case.n, min(2 * case.b, case.n - 1))
    ))
    available = psutil.virtual_memory().available
    if est > 0.8 * available:
        raise SizingError(
            f"case {case_id(case)} needs about {est >> 20} MiB but only "
            f"{available >> 20} MiB are available",
            suggested_n=case.n // 2,
        )


def run_bench(config: BenchConfig, peak_flops: float = 5e10) -> list[BenchRecord]:
    _check_memory(config.case, config.n_workers)
    flops = flop_count_exact(config.case)
    cid = case_id(config.case)
    records = []
    for repeat in range(config.repeats):
        # Each repeat is an independent run: the scheduling seed advances so
        # simulate-mode repeats sample different steal interleavings, the way
        # repeated real runs would.
        session = MatrixSession(
            n_workers=config.n_workers,
            mode=_MODES[config.mode],
            cache_capacity_bytes=config.cache_capacity_bytes,
            seed=config.seed + repeat,
        )
        matrix = generate(
            session.store, config.case, config.leaf_dim, "block_sparse",
            config.block_size, session.owner_policy,
        )
        spec, _ = multiply_spec(matrix, matrix, MultiplyVariant.regular())
        # Pin BLAS to one thread while timing: parallelism under measurement
        # comes from the workers, not from nested kernel threading.
        with threadpool_limits(limits=1):
            start = time.perf_counter()
            session.run_spec(spec)
            wall = time.perf_counter() - start
        stats = session.last_stats
        received = [s.bytes_received for s in stats]
        tasks = [s.tasks_executed for s in stats]
        rate = flops / wall if wall > 0 else 0.0
        records.append(
            BenchRecord(
                case_id=cid,
                n=config.case.n,
                n_workers=config.n_workers,
                repeat=repeat,
                wall_seconds=wall,
                flops=flops,
                efficiency=rate / peak_flops if peak_flops > 0 else 0.0,
                bytes_min=min(received),
                bytes_mean=sum(received) / len(received),
                bytes_max=max(received),
                tasks_min=min(tasks),
                tasks_mean=sum(tasks) / len(tasks),
                tasks_max=max(tasks),
            )
        )
    return records


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def emit_csv(records: list[BenchRecord], path):
    names = [f.name for f in fields(BenchRecord)]
    with open(path, "w", newline="") as fh:
        fh.write(f"# {CSV_VERSION}\n")
        writer = csv.writer(fh)
        writer.writerow(names)
        for rec in records:
            row = []
            for name in names:
                value = getattr(rec, name)
                row.append(repr(value) if isinstance(value, float) else str(value))
            writer.writerow(row)


def load_csv(path) -> list[BenchRecord]:
    with open(path) as fh:
        first = fh.readline().strip()
        if first != f"# {CSV_VERSION}":
            raise ConfigurationError(
                f"{path}: expected header '# {CSV_VERSION}', found {first!r}"
            )
        reader = csv.DictReader(fh)
        records = []
        for row in reader:
            kwargs = {}
            for f in fields(BenchRecord):
                raw = row[f.name]
                if f.name == "case_id":
                    kwargs[f.name] = raw
                elif f.name in _INT_FIELDS:
                    kwargs[f.name] = int(raw)
                else:
                    kwargs[f.name] = float(raw)
            records.append(BenchRecord(**kwargs))
    return records


# ---------------------------------------------------------------------------
# Plots
# ---------------------------------------------------------------------------

_PANELS = (
    ("wall_time", "Wall time (s)", lambda r: (r.wall_seconds,) * 3),
    ("efficiency", "Efficiency vs peak", lambda r: (r.efficiency,) * 3),
    ("bytes_received", "Bytes received per worker",
     lambda r: (r.bytes_min, r.bytes_mean, r.bytes_max)),
)


def emit_plots(records: list[BenchRecord], out_dir) -> list[str]:
    """Three SVG panels; returns the written paths.

    Per case, the solid line is the mean over repeats (and workers, for the
    bytes panel) and dashed lines are min/max, against the worker count.
    Lines carry SVG group ids ``series/<case>/<stat>`` for structural tests.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from pathlib import Path

    if not records:
        raise ConfigurationError("emit_plots needs at least one record")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cases = sorted({r.case_id for r in records})
    paths = []
    for stem, ylabel, extract in _PANELS:
        fig, ax = plt.subplots(figsize=(4.2, 3.2))
        for case in cases:
            points = {}
            for rec in records:
                if rec.case_id == case:
                    points.setdefault(rec.n_workers, []).append(extract(rec))
            workers = sorted(points)
            lo = [min(t[0] for t in points[w]) for w in workers]
            mid = [sum(t[1] for t in points[w]) / len(points[w]) for w in workers]
            hi = [max(t[2] for t in points[w]) for w in workers]
            (line,) = ax.plot(workers, mid, marker="o", label=case)
            line.set_gid(f"series/{case}/mean")
            color = line.get_color()
            (lo_line,) = ax.plot(workers, lo, linestyle="--", linewidth=0.8, color=color)
            lo_line.set_gid(f"series/{case}/min")
            (hi_line,) = ax.plot(workers, hi, linestyle="--", linewidth=0.8, color=color)
            hi_line.set_gid(f"series/{case}/max")
        ax.set_xlabel("workers")
        ax.set_ylabel(ylabel)
        ax.set_xscale("log", base=2)
        has_positive = any(v > 0 for r in records for v in extract(r))
        if stem != "efficiency" and has_positive:
            ax.set_yscale("log")
        ax.legend(fontsize=7)
        fig.tight_layout()
        path = out / f"{stem}.svg"
        fig.savefig(path, format="svg")
        plt.close(fig)
        paths.append(str(path))
    return paths
