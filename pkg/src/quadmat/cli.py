"""`bench` command line: run benchmarks, sweep configs, query the flop oracle."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .bench import BenchConfig, emit_csv, emit_plots, run_bench
from .errors import ConfigurationError, QuadmatError
from .generators import ExperimentCase, flop_count_exact, solve_block_size

_CASE_NAMES = {
    "banded": "banded",
    "growing-block": "growing_block",
    "random-blocks": "random_blocks",
}

_DEFAULT_PEAK = 5e10  # flops/second; override with --peak-flops


def _build_case(family: str, n: int, b: int | None, s: int | None,
                n_blocks: int | None, seed: int, target_ratio: float = 2.0) -> ExperimentCase:
    if b is None:
        b = max(1, n // 32)
    if family == "banded":
        return ExperimentCase("banded", n, b, seed=seed)
    if family == "growing_block":
        if s is None:
            s = solve_block_size("growing_block", n, b, target_ratio)
        return ExperimentCase("growing_block", n, b, s, seed=seed)
    if n_blocks is None:
        n_blocks = max(1, round(n / 100_000))
    if s is None:
        s = solve_block_size("random_blocks", n, b, target_ratio, n_blocks)
    return ExperimentCase("random_blocks", n, b, s, n_blocks, seed)


def _add_case_args(parser, require_n=True):
    parser.add_argument("--case", required=True, choices=sorted(_CASE_NAMES))
    parser.add_argument("--n", type=int, required=require_n)
    parser.add_argument("--b", type=int, default=None,
                        help="half-bandwidth (default n//32)")
    parser.add_argument("--s", type=int, default=None,
                        help="block size (default: solved for 2x banded flops)")
    parser.add_argument("--n-blocks", type=int, default=None,
                        help="random_blocks count (default n/1e5, at least 1)")
    parser.add_argument("--seed", type=int, default=0)


def _cmd_run(args) -> int:
    case = _build_case(_CASE_NAMES[args.case], args.n, args.b, args.s,
                       args.n_blocks, args.seed)
    mode = "shared_memory" if args.mode == "shared" else "simulate"
    config = BenchConfig(
        case=case,
        n_workers=args.workers,
        leaf_dim=args.leaf_dim,
        block_size=args.block_size,
        cache_capacity_bytes=args.cache_bytes,
        mode=mode,
        repeats=args.repeats,
        seed=args.seed,
    )
    records = run_bench(config, peak_flops=args.peak_flops)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "bench.csv"
    emit_csv(records, csv_path)
    plot_paths = emit_plots(records, out)
    for rec in records:
        print(
            f"{rec.case_id} workers={rec.n_workers} repeat={rec.repeat} "
            f"wall={rec.wall_seconds:.4f}s flops={rec.flops} "
            f"bytes/worker mean={rec.bytes_mean:.0f}"
        )
    print(f"wrote {csv_path} and {len(plot_paths)} plots to {out}")
    return 0


def _parse_sweep_config(path) -> dict:
    """Plain key=value lines; '#' starts a comment; lists are comma-separated."""
    options = {}
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        options[key] = value
    return options


def _cmd_sweep(args) -> int:
    opts = _parse_sweep_config(args.config)

    def get(key, default=None):
        return opts.pop(key, default)

    cases = [c.strip() for c in get("cases", "banded").split(",")]
    workers = [int(w) for w in get("workers", "1,2,4,8").split(",")]
    fixed_n = get("n")
    n_per_worker = get("weak_n_per_worker")
    if (fixed_n is None) == (n_per_worker is None):
        raise ConfigurationError(
            "sweep config needs exactly one of 'n' or 'weak_n_per_worker'"
        )
    b = get("b")
    leaf_dim = int(get("leaf_dim", 256))
    block_size = int(get("block_size", 64))
    cache_bytes = int(get("cache_bytes", 64 << 20))
    mode = get("mode", "simulate")
    repeats = int(get("repeats", 4))
    seed = int(get("seed", 0))
    peak = float(get("peak_flops", _DEFAULT_PEAK))
    out = Path(get("out", "bench-out"))
    if opts:
        raise ConfigurationError(f"unknown sweep config keys: {sorted(opts)}")

    records = []
    for case_name in cases:
        if case_name not in _CASE_NAMES:
            raise ConfigurationError(f"unknown case {case_name!r} in sweep config")
        for p in workers:
            n = int(fixed_n) if fixed_n is not None else int(n_per_worker) * p
            case = _build_case(_CASE_NAMES[case_name], n,
                               int(b) if b is not None else None, None, None, seed)
            config = BenchConfig(
                case=case, n_workers=p, leaf_dim=leaf_dim, block_size=block_size,
                cache_capacity_bytes=cache_bytes, mode=mode, repeats=repeats,
                seed=seed,
            )
            recs = run_bench(config, peak_flops=peak)
            records.extend(recs)
            mean_wall = sum(r.wall_seconds for r in recs) / len(recs)
            print(f"{case.family} n={n} workers={p}: mean wall {mean_wall:.4f}s")
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "bench.csv"
    emit_csv(records, csv_path)
    emit_plots(records, out)
    print(f"wrote {csv_path} and plots to {out}")
    return 0


def _cmd_flops(args) -> int:
    case = _build_case(_CASE_NAMES[args.case], args.n, args.b, args.s,
                       args.n_blocks, args.seed, args.target_ratio)
    print(flop_count_exact(case))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bench",
        description="Sparse quadtree matrix multiply benchmarks and flop oracle",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one benchmark case")
    _add_case_args(run)
    run.add_argument("--workers", type=int, default=4)
    run.add_argument("--mode", choices=("shared", "simulate"), default="simulate")
    run.add_argument("--leaf-dim", type=int, default=256)
    run.add_argument("--block-size", type=int, default=64)
    run.add_argument("--cache-bytes", type=int, default=64 << 20)
    run.add_argument("--repeats", type=int, default=4)
    run.add_argument("--peak-flops", type=float, default=_DEFAULT_PEAK,
                     help="theoretical peak flops/second for the efficiency panel")
    run.add_argument("--out", default="bench-out")
    run.set_defaults(func=_cmd_run)

    sweep = sub.add_parser("sweep", help="run a sweep from a key=value config file")
    sweep.add_argument("--config", required=True)
    sweep.set_defaults(func=_cmd_sweep)

    flops = sub.add_parser("flops", help="print the exact flop count for a case")
    _add_case_args(flops)
    flops.add_argument("--target-ratio", type=float, default=2.0,
                       help="flop ratio used when solving block sizes")
    flops.set_defaults(func=_cmd_flops)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except QuadmatError as exc:
        print(f"bench: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
