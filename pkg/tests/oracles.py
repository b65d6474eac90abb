"""Independent reference values and brute-force oracles for the test suite.

The constants and reference implementations here were derived and frozen
before the library code was written; tests compare the library against them,
never the other way around.

Flop-count convention: one multiply plus one add per contributing triple
(i,j,k), i.e. 2 x |{(i,j,k): P(i,k) and P(k,j)}| = 2 x sum_k colcount(k) *
rowcount(k) for a boolean pattern P.
"""

from __future__ import annotations

import numpy as np

# Published teraflop counts for one banded multiply, keyed by dimension
# (half-bandwidth 3000 throughout); tolerance 0.1%.
BANDED_TFLOPS = {
    100_000: 7.022e12,
    200_000: 14.22e12,
    400_000: 28.63e12,
    800_000: 57.44e12,
    1_600_000: 115.1e12,
    3_200_000: 230.3e12,
    6_400_000: 460.8e12,
}

# Published block sizes that double the banded flop count (tolerance 0.5%):
# one corner block (growing_block), and n/1e5 random diagonal blocks.
GROWING_BLOCK_S = {
    100_000: 15716,
    200_000: 19652,
    400_000: 24621,
    800_000: 30899,
    1_600_000: 38825,
    3_200_000: 48828,
    6_400_000: 61446,
}
RANDOM_BLOCKS_S = {
    100_000: 15716,
    200_000: 15705,
    400_000: 15700,
    800_000: 15697,
    1_600_000: 15696,
    3_200_000: 15695,
    6_400_000: 15695,
}


def banded_pattern(n: int, b: int) -> np.ndarray:
    i = np.arange(n)
    return (np.abs(i[:, None] - i[None, :]) <= b)


def case_pattern(n: int, b: int, blocks: list[tuple[int, int]]) -> np.ndarray:
    """Dense boolean pattern: band plus (position, size) diagonal blocks."""
    mask = banded_pattern(n, b)
    for p, s in blocks:
        mask[p : p + s, p : p + s] = True
    return mask


def brute_force_flops(pattern: np.ndarray) -> int:
    cols = pattern.sum(axis=0, dtype=np.int64)
    rows = pattern.sum(axis=1, dtype=np.int64)
    return 2 * int(np.dot(cols, rows))


def random_sparse(n: int, density: float, seed: int) -> np.ndarray:
    """Dense array with a random sparse support, values standard normal."""
    rng = np.random.default_rng(seed)
    k = max(1, int(n * n * density))
    idx = rng.choice(n * n, size=k, replace=False)
    out = np.zeros((n, n))
    out[np.divmod(idx, n)] = rng.standard_normal(k)
    return out


def decay_sparse(n: int, seed: int, width: int | None = None, scale: float = 4.0) -> np.ndarray:
    """Banded support with magnitudes decaying away from the diagonal.

    Gives the skewed norm distribution under which norm-based subproduct
    pruning actually triggers.
    """
    rng = np.random.default_rng(seed)
    width = width or max(4, n // 4)
    i = np.arange(n)
    dist = np.abs(i[:, None] - i[None, :])
    return np.exp(-dist / scale) * (dist <= width) * rng.standard_normal((n, n))


def random_spd(n: int, seed: int, density: float = 0.1) -> np.ndarray:
    """A = B B^T + n I: well-conditioned symmetric positive definite."""
    b = random_sparse(n, density, seed)
    return b @ b.T + n * np.eye(n)


def triplets_of(dense: np.ndarray):
    rows, cols = np.nonzero(dense)
    return rows, cols, dense[rows, cols]


def upper_triplets_of(dense: np.ndarray):
    rows, cols = np.nonzero(np.triu(dense))
    return rows, cols, dense[rows, cols]


def rel_err(got: np.ndarray, want: np.ndarray) -> float:
    denom = np.linalg.norm(want)
    if denom == 0:
        return float(np.linalg.norm(got))
    return float(np.linalg.norm(got - want) / denom)
