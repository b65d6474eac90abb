"""Frobenius-norm truncation and the approximate product.

truncate(A, tau) drops the smallest stored blocks, greedily, while the
Frobenius norm of everything dropped stays within tau; it reports exactly
how much mass it removed.  Subtrees it does not touch are shared with the
input, not copied.

multiply(..., variant="approximate", tau=...) prunes subproducts whose
norm product falls under a recursively split budget.  Every pruned product
is logged, the log sums to at most tau, and the true error never exceeds
that sum -- a certificate you can check after the fact.
"""

import math

import numpy as np

from quadmat import MatrixSession

session = MatrixSession(n_workers=2, seed=0)

# A matrix whose entries decay away from the diagonal: the natural habitat
# of norm-based truncation and pruning.
n = 128
i, j = np.indices((n, n))
decay = np.exp(-np.abs(i - j) / 4.0) * np.random.default_rng(5).standard_normal((n, n))
decay[np.abs(i - j) > 48] = 0.0
rows, cols = np.nonzero(decay)
a = session.matrix_from_triplets(n, rows, cols, decay[rows, cols],
                                 leaf_dim=16, block_size=4)
norm_a = np.linalg.norm(decay)

print(f"||A|| = {norm_a:.3f}, nnz = {session.tree_stats(a).nnz}")
for fraction in (0.0, 0.001, 0.01, 0.1):
    tau = fraction * norm_a
    t, removed = session.truncate(a, tau)
    measured = np.linalg.norm(session.to_dense(t) - decay)
    print(f"tau = {tau:9.5f}  removed(reported) = {removed:9.5f}  "
          f"removed(measured) = {measured:9.5f}  nnz {session.tree_stats(t).nnz:5d}")

# tau = 0 does not rebuild anything: the result is the same chunk.
same, _ = session.truncate(a, 0.0)
print(f"tau=0 returns the input chunk itself: {same.root == a.root}")

# Approximate product with an error certificate.
exact = session.to_dense(session.multiply(a, a))
for fraction in (1e-6, 1e-4, 1e-2):
    tau = fraction * norm_a * norm_a
    c = session.multiply(a, a, variant="approximate", tau=tau)
    log = session.last_engine.prune_log
    certificate = math.fsum(log)
    error = np.linalg.norm(session.to_dense(c) - exact)
    print(f"tau = {tau:8.2e}  pruned products = {len(log):4d}  "
          f"certificate = {certificate:8.2e}  true error = {error:8.2e}  "
          f"bound holds: {error <= certificate <= tau or certificate == 0.0}")
