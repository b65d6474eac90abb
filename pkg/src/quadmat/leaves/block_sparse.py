"""Block-sparse leaf: a 2-D grid of fixed-size dense blocks.

Zero blocks are neither stored nor referenced.  A cached Frobenius norm per
stored block supports truncation and norm queries without touching payload
data.
"""

from __future__ import annotations

import math
import struct

import numpy as np

from ..errors import ConfigurationError
from .base import Leaf, LeafKind, check_indices, op_view

_HDR = struct.Struct("<cIII")
_BLK = struct.Struct("<IId")


class BlockSparseLeaf(Leaf):
    kind = LeafKind.BLOCK_SPARSE

    def __init__(self, n: int, block_size: int, blocks: dict | None = None):
        if n % block_size != 0:
            raise ConfigurationError(f"block size {block_size} must divide leaf dimension {n}")
        self.n = n
        self.block_size = block_size
        self.nb = n // block_size
        self.blocks: dict[tuple[int, int], np.ndarray] = {}
        self.block_norms: dict[tuple[int, int], float] = {}
        if blocks:
            for key, arr in blocks.items():
                self._set_block(key, arr)

    def _set_block(self, key, arr):
        arr = np.ascontiguousarray(arr, dtype=np.float64)
        if np.any(arr):
            self.blocks[key] = arr
            self.block_norms[key] = float(np.linalg.norm(arr))

    @classmethod
    def zeros(cls, n: int, block_size: int) -> "BlockSparseLeaf":
        return cls(n, block_size)

    @classmethod
    def from_triplets(cls, n, rows, cols, vals, block_size) -> "BlockSparseLeaf":
        rows, cols = check_indices(n, rows, cols)
        vals = np.asarray(vals, dtype=np.float64)
        out = cls(n, block_size)
        if rows.size == 0:
            return out
        bi = rows // block_size
        bj = cols // block_size
        keys = bi * out.nb + bj
        order = np.argsort(keys, kind="stable")
        keys_sorted = keys[order]
        boundaries = np.flatnonzero(np.diff(keys_sorted)) + 1
        for seg in np.split(order, boundaries):
            k = int(keys[seg[0]])
            key = (k // out.nb, k % out.nb)
            arr = np.zeros((block_size, block_size))
            lr = rows[seg] - key[0] * block_size
            lc = cols[seg] - key[1] * block_size
            np.add.at(arr, (lr, lc), vals[seg])
            out._set_block(key, arr)
        return out

    @classmethod
    def from_dense(cls, arr: np.ndarray, block_size: int) -> "BlockSparseLeaf":
        arr = np.asarray(arr, dtype=np.float64)
        n = arr.shape[0]
        out = cls(n, block_size)
        nb = out.nb
        for bi in range(nb):
            for bj in range(nb):
                blk = arr[
                    bi * block_size : (bi + 1) * block_size,
                    bj * block_size : (bj + 1) * block_size,
                ]
                out._set_block((bi, bj), blk)
        return out

    def is_zero(self) -> bool:
        return not self.blocks

    def nnz(self) -> int:
        return int(sum(np.count_nonzero(b) for b in self.blocks.values()))

    def norm_frobenius(self) -> float:
        return math.sqrt(math.fsum(v * v for v in self.block_norms.values()))

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        bs = self.block_size
        for (bi, bj), blk in self.blocks.items():
            out[bi * bs : (bi + 1) * bs, bj * bs : (bj + 1) * bs] = blk
        return out

    def get_elements(self, rows, cols) -> np.ndarray:
        rows, cols = check_indices(self.n, rows, cols)
        bs = self.block_size
        out = np.zeros(rows.shape[0])
        for i in range(rows.shape[0]):
            key = (int(rows[i]) // bs, int(cols[i]) // bs)
            blk = self.blocks.get(key)
            if blk is not None:
                out[i] = blk[rows[i] % bs, cols[i] % bs]
        return out

    def multiply(self, other: "BlockSparseLeaf", ta: bool = False, tb: bool = False):
        self._check_conformant(other)
        if self.block_size != other.block_size:
            raise ConfigurationError("block sizes differ")
        nb = self.nb
        out = BlockSparseLeaf(self.n, self.block_size)
        for i in range(nb):
            for j in range(nb):
                acc = None
                for k in range(nb):
                    a = self.blocks.get((k, i) if ta else (i, k))
                    if a is None:
                        continue
                    b = other.blocks.get((j, k) if tb else (k, j))
                    if b is None:
                        continue
                    prod = op_view(a, ta) @ op_view(b, tb)
                    acc = prod if acc is None else acc + prod
                if acc is not None:
                    out._set_block((i, j), acc)
        return out

    def add(self, other: "BlockSparseLeaf", alpha: float = 1.0, beta: float = 1.0):
        self._check_conformant(other)
        if self.block_size != other.block_size:
            raise ConfigurationError("block sizes differ")
        if alpha == 1.0 and beta == 0.0:
            return self
        out = BlockSparseLeaf(self.n, self.block_size)
        keys = sorted(set(self.blocks) | set(other.blocks))
        for key in keys:
            a = self.blocks.get(key)
            b = other.blocks.get(key)
            if a is None:
                blk = beta * b
            elif b is None:
                blk = alpha * a
            else:
                blk = alpha * a + beta * b
            out._set_block(key, blk)
        return out

    def scale(self, alpha: float):
        if alpha == 1.0:
            return self
        out = BlockSparseLeaf(self.n, self.block_size)
        for key in sorted(self.blocks):
            out._set_block(key, alpha * self.blocks[key])
        return out

    def add_scaled_identity(self, c: float):
        if c == 0.0:
            return self
        out = BlockSparseLeaf(self.n, self.block_size, self.blocks)
        bs = self.block_size
        eye = np.eye(bs)
        for bi in range(self.nb):
            key = (bi, bi)
            blk = out.blocks.get(key)
            blk = c * eye if blk is None else blk + c * eye
            out.blocks.pop(key, None)
            out.block_norms.pop(key, None)
            out._set_block(key, blk)
        return out

    def truncate(self, tau: float) -> tuple["BlockSparseLeaf", float]:
        if tau < 0:
            raise ValueError("tau must be >= 0")
        items = sorted(self.block_norms.items(), key=lambda kv: (kv[1], kv[0]))
        budget = tau * tau
        removed_sq = 0.0
        dropped = set()
        for key, nrm in items:
            s = removed_sq + nrm * nrm
            if s > budget:
                break
            removed_sq = s
            dropped.add(key)
        if not dropped:
            return self, 0.0
        return self.drop_blocks(dropped), math.sqrt(removed_sq)

    def block_items(self):
        return sorted(self.block_norms.items())

    def drop_blocks(self, keys):
        keys = set(keys)
        out = BlockSparseLeaf(self.n, self.block_size)
        for key in sorted(self.blocks):
            if key not in keys:
                out._set_block(key, self.blocks[key])
        return out

    def sym_block_items(self):
        """Mirror blocks (i,j)/(j,i) paired under the canonical key (min,max)."""
        seen = set()
        items = []
        for bi, bj in sorted(self.block_norms):
            lo, hi = (bi, bj) if bi <= bj else (bj, bi)
            if (lo, hi) in seen:
                continue
            seen.add((lo, hi))
            a = self.block_norms.get((lo, hi), 0.0)
            b = self.block_norms.get((hi, lo), 0.0) if lo != hi else 0.0
            items.append(((lo, hi), math.sqrt(a * a + b * b)))
        return items

    def sym_drop_blocks(self, keys):
        expanded = set()
        for bi, bj in keys:
            expanded.add((bi, bj))
            expanded.add((bj, bi))
        return self.drop_blocks(expanded)

    def encode(self) -> bytes:
        parts = [_HDR.pack(b"B", self.n, self.block_size, len(self.blocks))]
        for key in sorted(self.blocks):
            parts.append(_BLK.pack(key[0], key[1], self.block_norms[key]))
            parts.append(self.blocks[key].tobytes(order="C"))
        return b"".join(parts)

    @classmethod
    def decode(cls, buf: bytes, offset: int = 0) -> "BlockSparseLeaf":
        tag, n, bs, count = _HDR.unpack_from(buf, offset)
        assert tag == b"B"
        offset += _HDR.size
        out = cls(n, bs)
        for _ in range(count):
            bi, bj, nrm = _BLK.unpack_from(buf, offset)
            offset += _BLK.size
            blk = np.frombuffer(buf, dtype="<f8", count=bs * bs, offset=offset).reshape(bs, bs)
            offset += bs * bs * 8
            out.blocks[(bi, bj)] = blk.copy()
            out.block_norms[(bi, bj)] = nrm
        return out
