"""Multiplication variants and the zero algebra.

Beyond the regular product, the library exploits structure:

  symmetric         one operand is stored as its upper triangle
  symmetric_square  A @ A for symmetric A, writing a symmetric result
  rank_k            X @ X.T from a general X, writing a symmetric result
  approximate       regular product with norm-based pruning (see demo 04)

Symmetric storage keeps only the upper triangle; the lower half is implied.
Nil subtrees short-circuit everywhere: multiplying by a zero matrix never
touches a single leaf kernel.
"""

import numpy as np

from quadmat import MatrixSession

rng = np.random.default_rng(3)
session = MatrixSession(n_workers=4, seed=0)

n = 64
m = np.where(rng.random((n, n)) < 0.15, rng.standard_normal((n, n)), 0.0)
sym_dense = (m + m.T) / 2

rows, cols = np.nonzero(m)
general = session.matrix_from_triplets(n, rows, cols, m[rows, cols],
                                       leaf_dim=16, block_size=4)

up_r, up_c = np.nonzero(np.triu(sym_dense))
symmetric = session.matrix_from_triplets(n, up_r, up_c, sym_dense[up_r, up_c],
                                         leaf_dim=16, block_size=4, symmetric=True)
print(f"symmetric matrix stores {session.tree_stats(symmetric).nnz} entries "
      f"for {np.count_nonzero(sym_dense)} logical nonzeros")

def err(result, want):
    return np.linalg.norm(session.to_dense(result) - want) / np.linalg.norm(want)

print(f"regular          error {err(session.multiply(general, general), m @ m):.2e}")
print(f"symmetric x general    {err(session.multiply(symmetric, general, variant='symmetric'), sym_dense @ m):.2e}")
print(f"symmetric_square       {err(session.multiply(symmetric, variant='symmetric_square'), sym_dense @ sym_dense):.2e}")
print(f"rank_k (X X^T)         {err(session.multiply(general, variant='rank_k'), m @ m.T):.2e}")

# Multiplying by the identity reproduces the operand bit for bit, not just
# within rounding: the product of a leaf with an identity leaf is the leaf.
identity = session.identity(n, leaf_dim=16, block_size=4)
via_identity = session.multiply(identity, general)
print(f"I @ A is bit-identical: {session.canonical(via_identity) == session.canonical(general)}")

# Zero operands never reach a kernel; the result is simply the nil handle.
zero = session.zeros(n, leaf_dim=16, block_size=4)
print(f"A @ 0 is nil: {session.multiply(general, zero).root.is_nil}")
print(f"A + (-1) * A is nil: {session.add(general, general, 1.0, -1.0).root.is_nil}")
