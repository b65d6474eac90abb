"""Shared builders tying test oracles to library sessions."""

from __future__ import annotations

import numpy as np

from quadmat import MatrixSession

import oracles

LEAF_KINDS = ("dense", "block_sparse", "hierarchical")
MODES = ("simulate", "threaded")


def make_session(n_workers: int = 2, mode: str = "simulate", **kw) -> MatrixSession:
    return MatrixSession(n_workers=n_workers, mode=mode, **kw)


def build(session, dense, leaf_dim=None, leaf_kind="block_sparse",
          symmetric=False, block_size=None, **kw):
    """Quadtree matrix from a dense array, with small defaults that force a
    multi-level tree and satisfy every leaf kind's shape constraints."""
    n = dense.shape[0]
    if leaf_dim is None:
        leaf_dim = 4 if n >= 8 else 2
    if block_size is None:
        block_size = max(2, leaf_dim // 2)
    if symmetric:
        rows, cols, vals = oracles.upper_triplets_of(dense)
    else:
        rows, cols, vals = oracles.triplets_of(dense)
    return session.matrix_from_triplets(
        n, rows, cols, vals, leaf_dim=leaf_dim, leaf_kind=leaf_kind,
        block_size=block_size, symmetric=symmetric, **kw,
    )
