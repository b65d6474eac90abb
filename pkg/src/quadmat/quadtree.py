"""Sparse quadtree matrices over the chunk store.

A matrix is a tree of chunks: branch nodes hold four child chunk ids in NW,
NE, SW, SE order (nil = identically-zero quadrant), leaf nodes hold one leaf
matrix of dimension ``leaf_dim``.  The logical dimension is padded up to
``leaf_dim * 2**depth``; padding is implicit and never stored.  Trees are
normalized: no branch has four nil children, leaves appear only at
``level == depth``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import codec
from .chunkstore import NIL, ChunkId, ChunkStore
from .errors import ConfigurationError, OutOfRangeError
from .leaves import LeafKind, leaf_from_triplets, zero_leaf


@dataclass(frozen=True)
class MatrixParams:
    n_logical: int
    leaf_dim: int
    depth: int

    @classmethod
    def create(cls, n_logical: int, leaf_dim: int) -> "MatrixParams":
        if n_logical < 1 or leaf_dim < 1:
            raise ConfigurationError("matrix and leaf dimensions must be positive")
        depth = 0
        while leaf_dim * (1 << depth) < n_logical:
            depth += 1
        return cls(n_logical, leaf_dim, depth)

    @property
    def n_padded(self) -> int:
        return self.leaf_dim * (1 << self.depth)

    def node_dim(self, level: int) -> int:
        return self.leaf_dim * (1 << (self.depth - level))


@dataclass(frozen=True)
class OwnerPolicy:
    """Round-robin chunk ownership over the subtree index at a split depth."""

    n_workers: int = 1
    split_depth: int | None = None

    def resolve_split(self, depth: int) -> int:
        if self.split_depth is not None:
            return min(self.split_depth, depth)
        d = 0
        while (1 << (2 * d)) < self.n_workers:
            d += 1
        return min(d, depth)

    def owner_of(self, subtree_index: int) -> int:
        return subtree_index % self.n_workers


@dataclass
class TreeStats:
    n_leaf_chunks: int = 0
    n_branch_chunks: int = 0
    stored_bytes: int = 0
    nnz: int = 0


@dataclass(frozen=True)
class Matrix:
    """A matrix value: root chunk plus the parameters needed to interpret it."""

    root: ChunkId
    params: MatrixParams
    leaf_kind: LeafKind
    block_size: int
    symmetric: bool = False


def read_node(store: ChunkStore, cid: ChunkId):
    """Decode a node chunk via a driver-side (unaccounted) read."""
    return codec.decode_node(store.peek(cid))


def build_from_triplets(
    store: ChunkStore,
    params: MatrixParams,
    rows,
    cols,
    vals,
    leaf_kind: LeafKind = LeafKind.BLOCK_SPARSE,
    block_size: int = 64,
    owner_policy: OwnerPolicy | None = None,
) -> ChunkId:
    """Build a normalized quadtree; duplicate entries are summed; empty -> nil."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=np.float64)
    if rows.size and (
        rows.min() < 0 or rows.max() >= params.n_logical
        or cols.min() < 0 or cols.max() >= params.n_logical
    ):
        raise OutOfRangeError(f"entry index outside [0, {params.n_logical})")
    policy = owner_policy or OwnerPolicy()
    split = policy.resolve_split(params.depth)

    def build(level, r0, c0, idx, subtree):
        if idx.size == 0:
            return NIL
        owner = policy.owner_of(subtree)
        if level == params.depth:
            leaf = leaf_from_triplets(
                leaf_kind, params.leaf_dim, rows[idx] - r0, cols[idx] - c0,
                vals[idx], block_size,
            )
            if leaf.is_zero():
                return NIL
            payload = codec.encode_leaf_node(level, leaf)
            return store.register(payload, owner, leaf.norm_frobenius())
        half = params.node_dim(level) // 2
        top = rows[idx] < r0 + half
        left = cols[idx] < c0 + half
        quads = [idx[top & left], idx[top & ~left], idx[~top & left], idx[~top & ~left]]
        offsets = [(0, 0), (0, half), (half, 0), (half, half)]
        children = []
        for q in range(4):
            child_sub = subtree * 4 + q if level < split else subtree
            children.append(
                build(level + 1, r0 + offsets[q][0], c0 + offsets[q][1], quads[q], child_sub)
            )
        if all(c.is_nil for c in children):
            return NIL
        norms = [store.norm_of(c) for c in children]
        payload = codec.encode_branch(level, children, norms)
        return store.register(payload, owner, math.sqrt(math.fsum(x * x for x in norms)))

    return build(0, 0, 0, np.arange(rows.shape[0]), 0)


def build_from_tiles(
    store: ChunkStore,
    params: MatrixParams,
    tile_fn,
    support_fn,
    leaf_kind: LeafKind = LeafKind.BLOCK_SPARSE,
    block_size: int = 64,
    owner_policy: OwnerPolicy | None = None,
) -> ChunkId:
    """Build a matrix from per-leaf-tile dense masks/arrays.

    ``support_fn(r0, r1, c0, c1)`` says whether the pattern intersects the
    half-open index rectangle; subtrees without support become nil without
    descending.  ``tile_fn(r0, c0)`` returns the leaf_dim x leaf_dim dense
    tile at that offset (logical clipping already applied) or None.
    Memory stays O(leaf_dim^2) per tile regardless of matrix size.
    """
    from .leaves import leaf_from_dense

    policy = owner_policy or OwnerPolicy()
    split = policy.resolve_split(params.depth)

    def build(level, r0, c0, subtree):
        dim = params.node_dim(level)
        if r0 >= params.n_logical or c0 >= params.n_logical:
            return NIL
        if not support_fn(r0, min(r0 + dim, params.n_logical), c0, min(c0 + dim, params.n_logical)):
            return NIL
        owner = policy.owner_of(subtree)
        if level == params.depth:
            tile = tile_fn(r0, c0)
            if tile is None or not np.any(tile):
                return NIL
            leaf = leaf_from_dense(leaf_kind, tile, block_size)
            payload = codec.encode_leaf_node(level, leaf)
            return store.register(payload, owner, leaf.norm_frobenius())
        half = dim // 2
        offsets = [(0, 0), (0, half), (half, 0), (half, half)]
        children = []
        for q in range(4):
            child_sub = subtree * 4 + q if level < split else subtree
            children.append(build(level + 1, r0 + offsets[q][0], c0 + offsets[q][1], child_sub))
        if all(c.is_nil for c in children):
            return NIL
        norms = [store.norm_of(c) for c in children]
        payload = codec.encode_branch(level, children, norms)
        return store.register(payload, owner, math.sqrt(math.fsum(x * x for x in norms)))

    return build(0, 0, 0, 0)


def explicit_zeros(
    store: ChunkStore,
    params: MatrixParams,
    leaf_kind: LeafKind = LeafKind.BLOCK_SPARSE,
    block_size: int = 64,
    owner_policy: OwnerPolicy | None = None,
) -> ChunkId:
    """A full tree whose leaves are explicit zero leaves (no nil anywhere).

    Normal operations never store zero blocks; this constructor exists to
    test that nil short-circuiting is value-transparent.
    """
    policy = owner_policy or OwnerPolicy()
    split = policy.resolve_split(params.depth)

    def build(level, subtree):
        owner = policy.owner_of(subtree)
        if level == params.depth:
            leaf = zero_leaf(leaf_kind, params.leaf_dim, block_size)
            return store.register(codec.encode_leaf_node(level, leaf), owner, 0.0)
        children = [
            build(level + 1, subtree * 4 + q if level < split else subtree) for q in range(4)
        ]
        payload = codec.encode_branch(level, children, [0.0] * 4)
        return store.register(payload, owner, 0.0)

    return build(0, 0)


def get_elements(store: ChunkStore, params: MatrixParams, root: ChunkId, rows, cols) -> np.ndarray:
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    if rows.size and (
        rows.min() < 0 or rows.max() >= params.n_logical
        or cols.min() < 0 or cols.max() >= params.n_logical
    ):
        raise OutOfRangeError(f"probe index outside [0, {params.n_logical})")
    out = np.zeros(rows.shape[0])

    def probe(cid, level, r0, c0, idx):
        if cid.is_nil or idx.size == 0:
            return
        node = read_node(store, cid)
        if node[0] == "leaf":
            out[idx] = node[2].get_elements(rows[idx] - r0, cols[idx] - c0)
            return
        _, _, children, _ = node
        half = params.node_dim(level) // 2
        top = rows[idx] < r0 + half
        left = cols[idx] < c0 + half
        probe(children[0], level + 1, r0, c0, idx[top & left])
        probe(children[1], level + 1, r0, c0 + half, idx[top & ~left])
        probe(children[2], level + 1, r0 + half, c0, idx[~top & left])
        probe(children[3], level + 1, r0 + half, c0 + half, idx[~top & ~left])

    probe(root, 0, 0, 0, np.arange(rows.shape[0]))
    return out


def tree_stats(store: ChunkStore, root: ChunkId) -> TreeStats:
    stats = TreeStats()

    def walk(cid):
        if cid.is_nil:
            return
        payload = store.peek(cid)
        node = codec.decode_node(payload)
        stats.stored_bytes += len(payload)
        if node[0] == "leaf":
            stats.n_leaf_chunks += 1
            stats.nnz += node[2].nnz()
        else:
            stats.n_branch_chunks += 1
            for child in node[2]:
                walk(child)

    walk(root)
    return stats


def check_normalized(store: ChunkStore, params: MatrixParams, root: ChunkId) -> bool:
    """Depth-first structural scan: leaves only at the bottom, no all-nil branch."""

    def walk(cid, level):
        if cid.is_nil:
            return True
        node = codec.decode_node(store.peek(cid))
        if node[0] == "leaf":
            return level == params.depth and node[1] == level
        _, lvl, children, _ = node
        if lvl != level or level >= params.depth or all(c.is_nil for c in children):
            return False
        return all(walk(c, level + 1) for c in children)

    return walk(root, 0)


def canonical_bytes(store: ChunkStore, root: ChunkId) -> bytes:
    """Scheduling-independent deep serialization of a tree.

    Branch chunks embed child chunk ids, whose numeric values depend on
    execution order; this form replaces ids with in-stream recursion so equal
    matrix content yields equal bytes for any worker count or mode.
    """
    parts = []

    def walk(cid):
        if cid.is_nil:
            parts.append(b"N")
            return
        node = codec.decode_node(store.peek(cid))
        if node[0] == "leaf":
            parts.append(b"L")
            parts.append(node[1].to_bytes(4, "little"))
            parts.append(node[2].encode())
        else:
            parts.append(b"B")
            parts.append(node[1].to_bytes(4, "little"))
            for child in node[2]:
                walk(child)

    walk(root)
    return b"".join(parts)


def tree_to_dense(store: ChunkStore, matrix: Matrix) -> np.ndarray:
    """Materialize the logical matrix (test/demo helper; small sizes only)."""
    params = matrix.params
    out = np.zeros((params.n_padded, params.n_padded))

    def fill(cid, level, r0, c0):
        if cid.is_nil:
            return
        node = read_node(store, cid)
        if node[0] == "leaf":
            d = node[2].to_dense()
            out[r0 : r0 + d.shape[0], c0 : c0 + d.shape[1]] = d
            return
        half = params.node_dim(level) // 2
        offs = [(0, 0), (0, half), (half, 0), (half, half)]
        for q, child in enumerate(node[2]):
            fill(child, level + 1, r0 + offs[q][0], c0 + offs[q][1])

    fill(matrix.root, 0, 0, 0)
    out = out[: params.n_logical, : params.n_logical]
    if matrix.symmetric:
        # Diagonal leaves store full blocks, so strictly-lower content inside
        # them duplicates the upper triangle; rebuild from the upper half only.
        out = np.triu(out) + np.triu(out, 1).T
    return out


def write_coordinate_text(store: ChunkStore, matrix: Matrix, path):
    """1-based ASCII coordinate triplets with a dimensions+nnz header line."""
    entries = []

    def walk(cid, level, r0, c0):
        if cid.is_nil:
            return
        node = read_node(store, cid)
        if node[0] == "leaf":
            d = node[2].to_dense()
            rr, cc = np.nonzero(d)
            for r, c in zip(rr, cc):
                gi, gj = r0 + int(r), c0 + int(c)
                if gi < matrix.params.n_logical and gj < matrix.params.n_logical:
                    entries.append((gi, gj, d[r, c]))
            return
        half = matrix.params.node_dim(level) // 2
        offs = [(0, 0), (0, half), (half, 0), (half, half)]
        for q, child in enumerate(node[2]):
            walk(child, level + 1, r0 + offs[q][0], c0 + offs[q][1])

    walk(matrix.root, 0, 0, 0)
    entries.sort()
    n = matrix.params.n_logical
    with open(path, "w") as fh:
        fh.write("% coordinate real general\n")
        fh.write(f"{n} {n} {len(entries)}\n")
        for i, j, v in entries:
            fh.write(f"{i + 1} {j + 1} {float(v)!r}\n")


def read_coordinate_text(path):
    """Returns (n, rows, cols, vals) from 1-based coordinate text."""
    rows, cols, vals = [], [], []
    header = None
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("%"):
                continue
            fields = line.split()
            if header is None:
                header = (int(fields[0]), int(fields[1]), int(fields[2]))
                continue
            rows.append(int(fields[0]) - 1)
            cols.append(int(fields[1]) - 1)
            vals.append(float(fields[2]))
    if header is None:
        raise ConfigurationError(f"{path}: no header line found")
    n, m, nnz = header
    if n != m:
        raise ConfigurationError(f"{path}: only square matrices are supported, header says {n} x {m}")
    if len(rows) != nnz:
        raise ConfigurationError(f"{path}: header says {nnz} entries, found {len(rows)}")
    return n, np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64), np.array(vals)
