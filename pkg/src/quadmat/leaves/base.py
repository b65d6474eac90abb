"""Common interface of the three leaf matrix representations.

Every leaf is an immutable square double-precision matrix of dimension ``n``.
Operations return new leaves; an operation whose result is exactly zero still
returns a leaf object -- callers decide whether to normalize it away (the
quadtree layer maps whole-zero leaves to the nil chunk id).

Transposition is virtual: ``multiply`` takes ``ta``/``tb`` flags instead of a
materializing transpose.
"""

from __future__ import annotations

import enum
from typing import Iterable

import numpy as np

from ..errors import ConfigurationError, DimensionMismatchError, OutOfRangeError


class LeafKind(enum.Enum):
    DENSE = "dense"
    BLOCK_SPARSE = "block_sparse"
    HIERARCHICAL = "hierarchical"


class Leaf:
    """Abstract leaf matrix. Concrete kinds: dense, block-sparse, hierarchical."""

    kind: LeafKind
    n: int
    block_size: int

    # -- construction -----------------------------------------------------
    @classmethod
    def zeros(cls, n: int, block_size: int) -> "Leaf":
        raise NotImplementedError

    @classmethod
    def from_triplets(cls, n, rows, cols, vals, block_size) -> "Leaf":
        raise NotImplementedError

    @classmethod
    def from_dense(cls, arr: np.ndarray, block_size: int) -> "Leaf":
        raise NotImplementedError

    # -- queries -----------------------------------------------------------
    def is_zero(self) -> bool:
        raise NotImplementedError

    def nnz(self) -> int:
        raise NotImplementedError

    def norm_frobenius(self) -> float:
        raise NotImplementedError

    def to_dense(self) -> np.ndarray:
        raise NotImplementedError

    def get_elements(self, rows, cols) -> np.ndarray:
        raise NotImplementedError

    # -- kernels -----------------------------------------------------------
    def multiply(self, other: "Leaf", ta: bool = False, tb: bool = False) -> "Leaf":
        raise NotImplementedError

    def add(self, other: "Leaf", alpha: float = 1.0, beta: float = 1.0) -> "Leaf":
        raise NotImplementedError

    def scale(self, alpha: float) -> "Leaf":
        raise NotImplementedError

    def add_scaled_identity(self, c: float) -> "Leaf":
        raise NotImplementedError

    def truncate(self, tau: float) -> tuple["Leaf", float]:
        raise NotImplementedError

    # -- truncation census support ------------------------------------------
    def block_items(self) -> list[tuple[object, float]]:
        """(key, Frobenius norm) of every stored block, for the global census."""
        raise NotImplementedError

    def drop_blocks(self, keys: Iterable[object]) -> "Leaf":
        raise NotImplementedError

    def sym_block_items(self) -> list[tuple[object, float]]:
        """Census items for a diagonal leaf of a symmetric matrix: mirror
        blocks are paired under one canonical key with combined norm so a
        drop keeps the leaf symmetric."""
        raise NotImplementedError

    def sym_drop_blocks(self, keys: Iterable[object]) -> "Leaf":
        raise NotImplementedError

    # -- serialization -------------------------------------------------------
    def encode(self) -> bytes:
        raise NotImplementedError

    def _check_conformant(self, other: "Leaf"):
        if self.kind is not other.kind:
            raise ConfigurationError(
                f"mixed leaf kinds: {self.kind.value} vs {other.kind.value}"
            )
        if self.n != other.n:
            raise DimensionMismatchError(f"leaf dimensions differ: {self.n} vs {other.n}")


def check_indices(n: int, rows, cols):
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    if rows.size and (rows.min() < 0 or rows.max() >= n or cols.min() < 0 or cols.max() >= n):
        raise OutOfRangeError(f"index outside [0, {n})")
    return rows, cols


def op_view(arr: np.ndarray, trans: bool) -> np.ndarray:
    return arr.T if trans else arr
