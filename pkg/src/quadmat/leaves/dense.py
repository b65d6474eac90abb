"""Dense leaf: column-major n-by-n array of doubles."""

from __future__ import annotations

import math
import struct

import numpy as np

from .base import Leaf, LeafKind, check_indices, op_view


class DenseLeaf(Leaf):
    kind = LeafKind.DENSE

    def __init__(self, values: np.ndarray):
        values = np.asfortranarray(values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ValueError("dense leaf must be a square 2-D array")
        self.values = values
        self.n = values.shape[0]
        self.block_size = self.n

    @classmethod
    def zeros(cls, n: int, block_size: int = 0) -> "DenseLeaf":
        return cls(np.zeros((n, n), order="F"))

    @classmethod
    def from_triplets(cls, n, rows, cols, vals, block_size: int = 0) -> "DenseLeaf":
        rows, cols = check_indices(n, rows, cols)
        values = np.zeros((n, n), order="F")
        np.add.at(values, (rows, cols), np.asarray(vals, dtype=np.float64))
        return cls(values)

    @classmethod
    def from_dense(cls, arr: np.ndarray, block_size: int = 0) -> "DenseLeaf":
        return cls(np.array(arr, dtype=np.float64, order="F"))

    def is_zero(self) -> bool:
        return not np.any(self.values)

    def nnz(self) -> int:
        return int(np.count_nonzero(self.values))

    def norm_frobenius(self) -> float:
        return float(np.linalg.norm(self.values))

    def to_dense(self) -> np.ndarray:
        return self.values.copy()

    def get_elements(self, rows, cols) -> np.ndarray:
        rows, cols = check_indices(self.n, rows, cols)
        return self.values[rows, cols].astype(np.float64)

    def multiply(self, other: "DenseLeaf", ta: bool = False, tb: bool = False) -> "DenseLeaf":
        self._check_conformant(other)
        out = op_view(self.values, ta) @ op_view(other.values, tb)
        return DenseLeaf(out)

    def add(self, other: "DenseLeaf", alpha: float = 1.0, beta: float = 1.0) -> "DenseLeaf":
        self._check_conformant(other)
        if alpha == 1.0 and beta == 0.0:
            return self
        return DenseLeaf(alpha * self.values + beta * other.values)

    def scale(self, alpha: float) -> "DenseLeaf":
        if alpha == 1.0:
            return self
        return DenseLeaf(alpha * self.values)

    def add_scaled_identity(self, c: float) -> "DenseLeaf":
        if c == 0.0:
            return self
        out = self.values.copy(order="F")
        idx = np.arange(self.n)
        out[idx, idx] += c
        return DenseLeaf(out)

    def truncate(self, tau: float) -> tuple["DenseLeaf", float]:
        """Zero the smallest-magnitude elements while the Frobenius norm of
        everything dropped stays <= tau."""
        if tau < 0:
            raise ValueError("tau must be >= 0")
        flat = self.values.flatten(order="F")
        order = np.argsort(np.abs(flat), kind="stable")
        budget = tau * tau
        csum = np.cumsum(flat[order] ** 2)
        cut = int(np.searchsorted(csum, budget, side="right"))
        while cut > 0 and csum[cut - 1] > budget:
            cut -= 1
        if cut == 0:
            return self, 0.0
        removed_sq = float(csum[cut - 1])
        if removed_sq == 0.0:  # only structural zeros under the budget
            return self, 0.0
        flat[order[:cut]] = 0.0
        out = flat.reshape((self.n, self.n), order="F")
        return DenseLeaf(out), math.sqrt(removed_sq)

    # The whole leaf is one census block for the dense kind.
    def block_items(self):
        if self.is_zero():
            return []
        return [((), self.norm_frobenius())]

    def drop_blocks(self, keys):
        if () in set(keys):
            return DenseLeaf.zeros(self.n)
        return self

    def sym_block_items(self):
        return self.block_items()

    def sym_drop_blocks(self, keys):
        return self.drop_blocks(keys)

    def encode(self) -> bytes:
        return struct.pack("<cI", b"D", self.n) + self.values.tobytes(order="F")

    @classmethod
    def decode(cls, buf: bytes, offset: int = 0) -> "DenseLeaf":
        tag, n = struct.unpack_from("<cI", buf, offset)
        assert tag == b"D"
        offset += struct.calcsize("<cI")
        values = np.frombuffer(buf, dtype="<f8", count=n * n, offset=offset)
        return cls(values.reshape((n, n), order="F"))
