"""Building quadtree matrices and moving them in and out of the store.

A matrix is a sparse quadtree of immutable chunks: branches hold four child
handles (any of which may be nil, meaning "identically zero") and leaves
hold small matrix payloads.  This demo builds one from triplets, inspects
the tree, and round-trips it through a coordinate-format text file.
"""

import os
import tempfile

import numpy as np

from quadmat import MatrixSession

rng = np.random.default_rng(42)
session = MatrixSession(n_workers=2, seed=0)

# A 13x13 matrix: deliberately not a power of two, so the tree pads the
# logical dimension up to 16 and clips everything outside 13x13.
n = 13
rows = rng.integers(0, n, size=30)
cols = rng.integers(0, n, size=30)
vals = rng.standard_normal(30)
a = session.matrix_from_triplets(n, rows, cols, vals, leaf_dim=4, block_size=2)

stats = session.tree_stats(a)
print(f"n={a.params.n_logical}, padded={a.params.n_padded}, depth={a.params.depth}")
print(f"stored nonzeros: {stats.nnz}")
print(f"chunks: {stats.n_leaf_chunks} leaves + {stats.n_branch_chunks} branches, "
      f"{stats.stored_bytes} bytes in the store")

# Duplicate coordinates sum, and entries that cancel to zero simply vanish
# from the tree: a fully cancelled matrix is the nil handle, no storage at all.
z = session.matrix_from_triplets(4, [1, 1], [2, 2], [5.0, -5.0], leaf_dim=2, block_size=2)
print(f"\ncancelled matrix is nil: {z.root.is_nil}")

# Random access reads batches of elements without densifying.
got = session.get_elements(a, rows[:5], cols[:5])
print(f"spot reads match dense: {np.allclose(got, session.to_dense(a)[rows[:5], cols[:5]])}")

# Coordinate-format text round-trip (1-based indices, repr-exact values).
with tempfile.TemporaryDirectory() as tmp:
    path = os.path.join(tmp, "a.mtx")
    session.write_coordinate(a, path)
    b = session.load_coordinate(path, leaf_dim=4, block_size=2)
    print(f"file round-trip exact: {np.array_equal(session.to_dense(a), session.to_dense(b))}")

# The canonical byte encoding is independent of how chunk ids were assigned,
# so two sessions that build the same matrix agree byte for byte.
other = MatrixSession(n_workers=3, seed=99)
c = other.matrix_from_triplets(n, rows, cols, vals, leaf_dim=4, block_size=2)
print(f"canonical bytes agree across sessions: "
      f"{session.canonical(a) == other.canonical(c)}")
