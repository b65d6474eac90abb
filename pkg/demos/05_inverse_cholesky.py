"""Recursive inverse Cholesky factorization.

inverse_cholesky(A) returns an upper-triangular Z with Z^T A Z = I for a
symmetric positive definite A stored in symmetric (upper-triangle) form.
The recursion factors the leading quadrant, propagates it through the
off-diagonal quadrant, and recurses on a Schur complement -- every step is
built from the library's own multiply/add/truncate tasks, so it runs on
the same task runtime as everything else.

Z Z^T reconstructs the inverse, which is how it gets used downstream.
A matrix that is not positive definite fails with the offending pivot
index instead of garbage.
"""

import numpy as np

from quadmat import MatrixSession, NotPositiveDefiniteError

rng = np.random.default_rng(11)
session = MatrixSession(n_workers=2, seed=0)

# Build an SPD matrix the honest way: B B^T plus a diagonal shift.
n = 96
b = np.where(rng.random((n, n)) < 0.1, rng.standard_normal((n, n)), 0.0)
spd = b @ b.T + n * np.eye(n)

up_r, up_c = np.nonzero(np.triu(spd))
a = session.matrix_from_triplets(n, up_r, up_c, spd[up_r, up_c],
                                 leaf_dim=16, block_size=4, symmetric=True)

z = session.inverse_cholesky(a)
zd = session.to_dense(z)
print(f"Z is upper triangular: {np.allclose(zd, np.triu(zd))}")
print(f"||Z^T A Z - I|| = {np.linalg.norm(zd.T @ spd @ zd - np.eye(n)):.2e}")

# Z Z^T equals the inverse of A.
inv = session.multiply(z, variant="rank_k")
print(f"||Z Z^T - A^-1|| = {np.linalg.norm(session.to_dense(inv) - np.linalg.inv(spd)):.2e}")

# An indefinite matrix reports which pivot broke.
bad = spd.copy()
bad[5, 5] = -1000.0
up_r, up_c = np.nonzero(np.triu(bad))
not_spd = session.matrix_from_triplets(n, up_r, up_c, bad[up_r, up_c],
                                       leaf_dim=16, block_size=4, symmetric=True)
try:
    session.inverse_cholesky(not_spd)
except NotPositiveDefiniteError as exc:
    print(f"indefinite input raises with pivot index {exc.index}: {exc}")
