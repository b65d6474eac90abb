"""Experiment matrix families and the exact flop-count oracle.

Three families, all built around a banded pattern with half-bandwidth ``b``
(nonzeros exactly at |i - j| <= b, value 1.0):

- ``banded``: the band alone.
- ``growing_block``: band plus one dense s x s block at the upper-left corner.
- ``random_blocks``: band plus ``n_blocks`` dense s x s diagonal blocks at
  seeded random non-overlapping positions.

The flop oracle counts 2 x |{(i,j,k): pattern(i,k) and pattern(k,j)}| without
materializing anything: for a symmetric pattern the count is 2 * sum_k w(k)^2
where w(k) is the number of nonzeros in column k, and the block families only
perturb w(k) inside block rows, so exact per-column widths are summed directly
(boundary clipping included).  ``solve_block_size`` inverts the oracle to find
the block size that multiplies the banded flop count by a target ratio.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, PlacementError
from .leaves import LeafKind
from .quadtree import Matrix, MatrixParams, OwnerPolicy, build_from_tiles

FAMILIES = ("banded", "growing_block", "random_blocks")


@dataclass(frozen=True)
class ExperimentCase:
    family: str
    n: int
    b: int
    s: int = 0
    n_blocks: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(f"unknown family {self.family!r}")
        if self.n < 1:
            raise ConfigurationError("n must be positive")
        if self.b < 0:
            raise ConfigurationError("half-bandwidth b must be >= 0")
        if self.s < 0 or self.s > self.n:
            raise ConfigurationError("block size s must be in [0, n]")
        if self.family == "random_blocks":
            if self.n_blocks < 0:
                raise ConfigurationError("n_blocks must be >= 0")
            if self.n_blocks * self.s > self.n:
                raise PlacementError(
                    f"{self.n_blocks} blocks of size {self.s} cannot fit in n={self.n}"
                )


# ---------------------------------------------------------------------------
# Placement
# ---------------------------------------------------------------------------


def block_positions(case: ExperimentCase, max_tries: int = 1000) -> list[int]:
    """Seeded non-overlapping diagonal block start offsets, ascending.

    Positions are kept clear of the matrix edges (at least b away) whenever
    the dimension allows it, so the per-block pattern contribution is
    position-independent and nnz totals match across seeds.
    """
    if case.family == "banded" or case.s == 0:
        return []
    if case.family == "growing_block":
        return [0]
    n, s, b = case.n, case.s, case.b
    count = case.n_blocks
    if count == 0:
        return []
    lo, hi = b, n - s - b
    if lo > hi:
        lo, hi = 0, n - s
    rng = np.random.default_rng(case.seed)
    placed: list[int] = []
    tries = 0
    budget = max_tries * count
    while len(placed) < count:
        if tries >= budget:
            raise PlacementError(
                f"could not place {count} non-overlapping blocks of size {s} "
                f"in [{lo}, {hi}] after {budget} tries"
            )
        tries += 1
        p = int(rng.integers(lo, hi + 1))
        if all(abs(p - q) >= s for q in placed):
            placed.append(p)
    return sorted(placed)


# ---------------------------------------------------------------------------
# Exact pattern/flop oracle
# ---------------------------------------------------------------------------


def _banded_widths(n: int, b: int) -> np.ndarray:
    k = np.arange(n, dtype=np.int64)
    return np.minimum(k + b, n - 1) - np.maximum(k - b, 0) + 1


def _block_corrections(n, b, s, positions, squared: bool) -> int:
    """Sum over blocks of the width change on block rows: union of the band
    interval [k-b, k+b] and the block interval [p, p+s-1], clipped to [0, n-1]
    (the two always overlap because k lies inside the block)."""
    total = 0
    for p in positions:
        k = np.arange(p, p + s, dtype=np.int64)
        wu = (
            np.minimum(np.maximum(k + b, p + s - 1), n - 1)
            - np.maximum(np.minimum(k - b, p), 0) + 1
        )
        wb = np.minimum(k + b, n - 1) - np.maximum(k - b, 0) + 1
        if squared:
            total += int(np.sum(wu * wu - wb * wb, dtype=np.int64))
        else:
            total += int(np.sum(wu - wb, dtype=np.int64))
    return total


def pattern_nnz(case: ExperimentCase) -> int:
    w = _banded_widths(case.n, case.b)
    base = int(np.sum(w, dtype=np.int64))
    return base + _block_corrections(case.n, case.b, case.s, block_positions(case), False)


def flop_count_exact(case: ExperimentCase) -> int:
    w = _banded_widths(case.n, case.b)
    base = int(np.sum(w * w, dtype=np.int64))
    corr = _block_corrections(case.n, case.b, case.s, block_positions(case), True)
    return 2 * (base + corr)


# ---------------------------------------------------------------------------
# Block-size solver (Table 1 inverse problem)
# ---------------------------------------------------------------------------


def _corner_flops(n: int, b: int, s: int) -> float:
    """Squared-width gain of one corner block at position 0.

    Accumulates in float64: per-element squares stay inside int64, but the
    sum can pass 2**63 when the bisection probes block sizes near n.  The
    float total is exact below 2**53, which covers the threshold-crossing
    region; far above it only monotone dominance matters.
    """
    t = np.arange(s, dtype=np.int64)
    wu = np.maximum(np.minimum(t + b, n - 1), s - 1) + 1
    wb = np.minimum(t + b, n - 1) - np.maximum(t - b, 0) + 1
    return float(np.sum(wu * wu - wb * wb, dtype=np.float64))


def _interior_flops(n: int, b: int, s: int) -> float:
    """Squared-width gain of one interior block far from both edges."""
    t = np.arange(s, dtype=np.int64)
    wu = np.maximum(t + b, s - 1) - np.minimum(t - b, 0) + 1
    wb = np.full(s, 2 * b + 1, dtype=np.int64)
    return float(np.sum(wu * wu - wb * wb, dtype=np.float64))


def solve_block_size(
    family: str,
    n: int,
    b: int,
    target_ratio: float = 2.0,
    n_blocks: int | None = None,
) -> int:
    """Smallest s whose family flop count reaches target_ratio x banded flops.

    Uses the analytic model: growing_block adds one corner block;
    random_blocks adds one corner-equivalent block plus (n_blocks - 1)
    interior blocks (n_blocks defaults to n / 10^5, at least 1).  Monotone
    bisection over the exact oracle.
    """
    if family not in ("growing_block", "random_blocks"):
        raise ConfigurationError(f"solve_block_size does not apply to {family!r}")
    base = flop_count_exact(ExperimentCase("banded", n, b))
    target = target_ratio * base
    if family == "growing_block":
        blocks = 1
        interior = 0
    else:
        blocks = max(1, round(n / 100_000)) if n_blocks is None else n_blocks
        if blocks < 1:
            raise ConfigurationError("random_blocks needs n_blocks >= 1")
        interior = blocks - 1

    def total(s: int) -> float:
        return base + 2 * (_corner_flops(n, b, s) + interior * _interior_flops(n, b, s))

    hi_limit = n // blocks
    if total(hi_limit) < target:
        raise ConfigurationError(
            f"no block size up to {hi_limit} reaches {target_ratio}x the banded flops"
        )
    lo, hi = 0, hi_limit
    while lo < hi:
        mid = (lo + hi) // 2
        if total(mid) >= target:
            hi = mid
        else:
            lo = mid + 1
    return lo


def default_case(family: str, n: int, b: int, seed: int = 0,
                 target_ratio: float = 2.0) -> ExperimentCase:
    """A fully-specified case: block sizes solved from the flop oracle."""
    if family == "banded":
        return ExperimentCase("banded", n, b, seed=seed)
    if family == "growing_block":
        s = solve_block_size("growing_block", n, b, target_ratio)
        return ExperimentCase("growing_block", n, b, s, seed=seed)
    n_blocks = max(1, round(n / 100_000))
    s = solve_block_size("random_blocks", n, b, target_ratio, n_blocks)
    return ExperimentCase("random_blocks", n, b, s, n_blocks, seed)


# ---------------------------------------------------------------------------
# Matrix generation (tile-based; never materializes global triplets)
# ---------------------------------------------------------------------------


def generate(
    store,
    case: ExperimentCase,
    leaf_dim: int = 128,
    leaf_kind: LeafKind | str = LeafKind.BLOCK_SPARSE,
    block_size: int = 16,
    owner_policy: OwnerPolicy | None = None,
) -> Matrix:
    from .leaves import leaf_class

    kind = leaf_class(leaf_kind).kind
    params = MatrixParams.create(case.n, leaf_dim)
    positions = block_positions(case)
    n, b, s = case.n, case.b, case.s

    def support(r0, r1, c0, c1):
        if c0 - r1 + 1 <= b and r0 - c1 + 1 <= b:
            return True
        return any(p < r1 and r0 < p + s and p < c1 and c0 < p + s for p in positions)

    def tile(r0, c0):
        i = r0 + np.arange(leaf_dim)
        j = c0 + np.arange(leaf_dim)
        mask = np.abs(i[:, None] - j[None, :]) <= b
        for p in positions:
            if p < r0 + leaf_dim and r0 < p + s and p < c0 + leaf_dim and c0 < p + s:
                ri0, ri1 = max(p - r0, 0), min(p + s - r0, leaf_dim)
                ci0, ci1 = max(p - c0, 0), min(p + s - c0, leaf_dim)
                mask[ri0:ri1, ci0:ci1] = True
            elif p >= r0 + leaf_dim and p >= c0 + leaf_dim:
                break
        mask &= (i[:, None] < n) & (j[None, :] < n)
        if not mask.any():
            return None
        return mask.astype(np.float64)

    root = build_from_tiles(
        store, params, tile, support, kind, block_size, owner_policy
    )
    return Matrix(root, params, kind, block_size, False)
