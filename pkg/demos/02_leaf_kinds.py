"""The three leaf kinds and what they cost.

Leaves are pluggable.  All three kinds implement the same kernel interface,
so every operation works identically on each; they differ in how a leaf
stores its elements:

  dense         one contiguous leaf_dim x leaf_dim array
  block_sparse  a grid of fixed-size blocks, absent blocks cost nothing
  hierarchical  a miniature quadtree inside the leaf, nil quadrants elided

A matrix built with one kind keeps it for life, and operands of different
kinds never mix in one operation.
"""

import numpy as np

from quadmat import ConfigurationError, MatrixSession

rng = np.random.default_rng(7)
session = MatrixSession(n_workers=2, seed=0)

# A band plus a few scattered entries: mostly-empty leaves either pay full
# price (dense), per-block price (block_sparse), or per-quadrant price
# (hierarchical).
n = 256
i, j = np.indices((n, n))
band = np.abs(i - j) <= 2
scatter = rng.random((n, n)) < 0.001
dense_matrix = np.where(band | scatter, rng.standard_normal((n, n)), 0.0)
rows, cols = np.nonzero(dense_matrix)
vals = dense_matrix[rows, cols]

print(f"{'kind':>14} {'leaves':>7} {'stored bytes':>13}")
matrices = {}
for kind in ("dense", "block_sparse", "hierarchical"):
    a = session.matrix_from_triplets(
        n, rows, cols, vals, leaf_dim=64, leaf_kind=kind, block_size=8,
    )
    matrices[kind] = a
    stats = session.tree_stats(a)
    print(f"{kind:>14} {stats.n_leaf_chunks:>7} {stats.stored_bytes:>13}")

# Same values regardless of representation.
reference = session.to_dense(matrices["dense"])
for kind in ("block_sparse", "hierarchical"):
    assert np.array_equal(session.to_dense(matrices[kind]), reference)
print("\nall three kinds reproduce the same matrix exactly")

# Products of same-kind operands work; mixing kinds is refused up front.
product = session.multiply(matrices["block_sparse"], matrices["block_sparse"])
err = np.linalg.norm(session.to_dense(product) - reference @ reference)
print(f"block_sparse product error vs dense algebra: {err:.2e}")

try:
    session.multiply(matrices["dense"], matrices["hierarchical"])
except ConfigurationError as exc:
    print(f"mixing kinds raises: {exc}")
