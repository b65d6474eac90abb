"""Hierarchical leaf: a nested quadtree inside one leaf, with dense blocks of
one fixed size at the bottom and nil for zero quadrants -- the same shape as
the top-level matrix representation, in miniature.

Internal node encoding: ``None`` (zero), a dense ``block_size`` square
``ndarray`` (bottom), or a list of four child nodes in NW, NE, SW, SE order.
"""

from __future__ import annotations

import math
import struct

import numpy as np

from ..errors import ConfigurationError
from .base import Leaf, LeafKind, check_indices, op_view

_CHILD_MIRROR = {0: 0, 1: 2, 2: 1, 3: 3}


def _normalize(children: list) -> object:
    if all(c is None for c in children):
        return None
    return children


class HierarchicalLeaf(Leaf):
    kind = LeafKind.HIERARCHICAL

    def __init__(self, n: int, block_size: int, node=None):
        if n < block_size or n % block_size != 0:
            raise ConfigurationError(f"leaf dim {n} must be a multiple of block size {block_size}")
        m = n // block_size
        if m & (m - 1):
            raise ConfigurationError("hierarchical leaf dim must be block_size * 2^k")
        self.n = n
        self.block_size = block_size
        self.node = node

    def _wrap(self, node) -> "HierarchicalLeaf":
        return HierarchicalLeaf(self.n, self.block_size, node)

    @classmethod
    def zeros(cls, n: int, block_size: int) -> "HierarchicalLeaf":
        return cls(n, block_size, None)

    @classmethod
    def from_triplets(cls, n, rows, cols, vals, block_size) -> "HierarchicalLeaf":
        cls(n, block_size)  # validate the shape before recursing
        rows, cols = check_indices(n, rows, cols)
        vals = np.asarray(vals, dtype=np.float64)

        def build(size, r0, c0, idx):
            if idx.size == 0:
                return None
            if size == block_size:
                blk = np.zeros((size, size))
                np.add.at(blk, (rows[idx] - r0, cols[idx] - c0), vals[idx])
                return blk if np.any(blk) else None
            half = size // 2
            top = rows[idx] < r0 + half
            left = cols[idx] < c0 + half
            children = [
                build(half, r0, c0, idx[top & left]),
                build(half, r0, c0 + half, idx[top & ~left]),
                build(half, r0 + half, c0, idx[~top & left]),
                build(half, r0 + half, c0 + half, idx[~top & ~left]),
            ]
            return _normalize(children)

        return cls(n, block_size, build(n, 0, 0, np.arange(rows.shape[0])))

    @classmethod
    def from_dense(cls, arr: np.ndarray, block_size: int) -> "HierarchicalLeaf":
        arr = np.asarray(arr, dtype=np.float64)
        n = arr.shape[0]
        cls(n, block_size)  # validate the shape before recursing

        def build(sub):
            if not np.any(sub):
                return None
            size = sub.shape[0]
            if size == block_size:
                return np.ascontiguousarray(sub)
            h = size // 2
            return _normalize(
                [build(sub[:h, :h]), build(sub[:h, h:]), build(sub[h:, :h]), build(sub[h:, h:])]
            )

        return cls(n, block_size, build(arr))

    def is_zero(self) -> bool:
        return self.node is None

    def nnz(self) -> int:
        def count(node):
            if node is None:
                return 0
            if isinstance(node, np.ndarray):
                return int(np.count_nonzero(node))
            return sum(count(c) for c in node)

        return count(self.node)

    def norm_frobenius(self) -> float:
        def sq(node):
            if node is None:
                return 0.0
            if isinstance(node, np.ndarray):
                nrm = float(np.linalg.norm(node))
                return nrm * nrm
            return math.fsum(sq(c) for c in node)

        return math.sqrt(sq(self.node))

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))

        def fill(node, size, r0, c0):
            if node is None:
                return
            if isinstance(node, np.ndarray):
                out[r0 : r0 + size, c0 : c0 + size] = node
                return
            h = size // 2
            fill(node[0], h, r0, c0)
            fill(node[1], h, r0, c0 + h)
            fill(node[2], h, r0 + h, c0)
            fill(node[3], h, r0 + h, c0 + h)

        fill(self.node, self.n, 0, 0)
        return out

    def get_elements(self, rows, cols) -> np.ndarray:
        rows, cols = check_indices(self.n, rows, cols)
        out = np.zeros(rows.shape[0])

        def probe(node, size, r0, c0, idx):
            if node is None or idx.size == 0:
                return
            if isinstance(node, np.ndarray):
                out[idx] = node[rows[idx] - r0, cols[idx] - c0]
                return
            h = size // 2
            top = rows[idx] < r0 + h
            left = cols[idx] < c0 + h
            probe(node[0], h, r0, c0, idx[top & left])
            probe(node[1], h, r0, c0 + h, idx[top & ~left])
            probe(node[2], h, r0 + h, c0, idx[~top & left])
            probe(node[3], h, r0 + h, c0 + h, idx[~top & ~left])

        probe(self.node, self.n, 0, 0, np.arange(rows.shape[0]))
        return out

    def multiply(self, other: "HierarchicalLeaf", ta: bool = False, tb: bool = False):
        self._check_conformant(other)
        if self.block_size != other.block_size:
            raise ConfigurationError("block sizes differ")
        add_nodes, _ = self._node_helpers()

        def mul(a, b):
            if a is None or b is None:
                return None
            if isinstance(a, np.ndarray):
                prod = op_view(a, ta) @ op_view(b, tb)
                return prod if np.any(prod) else None
            children = []
            for i in (0, 1):
                for j in (0, 1):
                    acc = None
                    for k in (0, 1):
                        ca = a[k * 2 + i] if ta else a[i * 2 + k]
                        cb = b[j * 2 + k] if tb else b[k * 2 + j]
                        term = mul(ca, cb)
                        if term is not None:
                            acc = term if acc is None else add_nodes(acc, term, 1.0, 1.0)
                    children.append(acc)
            return _normalize(children)

        return self._wrap(mul(self.node, other.node))

    def _node_helpers(self):
        def scale_node(node, alpha):
            if node is None:
                return None
            if alpha == 1.0:
                return node
            if isinstance(node, np.ndarray):
                out = alpha * node
                return out if np.any(out) else None
            return _normalize([scale_node(c, alpha) for c in node])

        def add_nodes(a, b, alpha, beta):
            if a is None and b is None:
                return None
            if a is None:
                return scale_node(b, beta)
            if b is None:
                return scale_node(a, alpha)
            if isinstance(a, np.ndarray):
                out = alpha * a + beta * b
                return out if np.any(out) else None
            return _normalize([add_nodes(a[i], b[i], alpha, beta) for i in range(4)])

        return add_nodes, scale_node

    def add(self, other: "HierarchicalLeaf", alpha: float = 1.0, beta: float = 1.0):
        self._check_conformant(other)
        if alpha == 1.0 and beta == 0.0:
            return self
        add_nodes, _ = self._node_helpers()
        return self._wrap(add_nodes(self.node, other.node, alpha, beta))

    def scale(self, alpha: float):
        if alpha == 1.0:
            return self
        _, scale_node = self._node_helpers()
        return self._wrap(scale_node(self.node, alpha))

    def add_scaled_identity(self, c: float):
        if c == 0.0:
            return self
        bs = self.block_size

        def rec(node, size):
            if size == bs:
                blk = c * np.eye(size) if node is None else node + c * np.eye(size)
                return blk if np.any(blk) else None
            children = list(node) if isinstance(node, list) else [None] * 4
            h = size // 2
            children[0] = rec(children[0], h)
            children[3] = rec(children[3], h)
            return _normalize(children)

        return self._wrap(rec(self.node, self.n))

    # -- truncation (bottom-block granularity) -----------------------------
    def _items_with_paths(self):
        items = []

        def walk(node, path):
            if node is None:
                return
            if isinstance(node, np.ndarray):
                items.append((path, float(np.linalg.norm(node))))
                return
            for q, child in enumerate(node):
                walk(child, path + (q,))

        walk(self.node, ())
        return items

    def truncate(self, tau: float) -> tuple["HierarchicalLeaf", float]:
        if tau < 0:
            raise ValueError("tau must be >= 0")
        items = sorted(self._items_with_paths(), key=lambda kv: (kv[1], kv[0]))
        budget = tau * tau
        removed_sq = 0.0
        dropped = set()
        for path, nrm in items:
            s = removed_sq + nrm * nrm
            if s > budget:
                break
            removed_sq = s
            dropped.add(path)
        if not dropped:
            return self, 0.0
        return self.drop_blocks(dropped), math.sqrt(removed_sq)

    def block_items(self):
        return sorted(self._items_with_paths())

    def drop_blocks(self, keys):
        keys = set(keys)

        def rebuild(node, path):
            if node is None:
                return None
            if isinstance(node, np.ndarray):
                return None if path in keys else node
            return _normalize([rebuild(c, path + (q,)) for q, c in enumerate(node)])

        return self._wrap(rebuild(self.node, ()))

    def sym_block_items(self):
        """Pair each bottom block with its mirrored path (quadrant 1 <-> 2)."""
        norms = dict(self._items_with_paths())
        seen = set()
        items = []
        for path in sorted(norms):
            mirror = tuple(_CHILD_MIRROR[q] for q in path)
            canon = min(path, mirror)
            if canon in seen:
                continue
            seen.add(canon)
            a = norms.get(canon, 0.0)
            other = max(path, mirror)
            b = norms.get(other, 0.0) if other != canon else 0.0
            items.append((canon, math.sqrt(a * a + b * b)))
        return items

    def sym_drop_blocks(self, keys):
        expanded = set()
        for path in keys:
            expanded.add(path)
            expanded.add(tuple(_CHILD_MIRROR[q] for q in path))
        return self.drop_blocks(expanded)

    def encode(self) -> bytes:
        parts = [struct.pack("<cII", b"H", self.n, self.block_size)]

        def emit(node):
            if node is None:
                parts.append(b"\x00")
            elif isinstance(node, np.ndarray):
                parts.append(b"\x01")
                parts.append(node.tobytes(order="C"))
            else:
                parts.append(b"\x02")
                for c in node:
                    emit(c)

        emit(self.node)
        return b"".join(parts)

    @classmethod
    def decode(cls, buf: bytes, offset: int = 0) -> "HierarchicalLeaf":
        tag, n, bs = struct.unpack_from("<cII", buf, offset)
        assert tag == b"H"
        pos = [offset + struct.calcsize("<cII")]

        def parse():
            t = buf[pos[0]]
            pos[0] += 1
            if t == 0:
                return None
            if t == 1:
                blk = np.frombuffer(buf, dtype="<f8", count=bs * bs, offset=pos[0])
                pos[0] += bs * bs * 8
                return blk.reshape(bs, bs).copy()
            return [parse() for _ in range(4)]

        return cls(n, bs, parse())
