"""Pluggable leaf matrix types behind one kernel interface."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError
from .base import Leaf, LeafKind
from .block_sparse import BlockSparseLeaf
from .dense import DenseLeaf
from .hierarchical import HierarchicalLeaf

_CLASSES = {
    LeafKind.DENSE: DenseLeaf,
    LeafKind.BLOCK_SPARSE: BlockSparseLeaf,
    LeafKind.HIERARCHICAL: HierarchicalLeaf,
}

_TAGS = {b"D": DenseLeaf, b"B": BlockSparseLeaf, b"H": HierarchicalLeaf}


def leaf_class(kind):
    """Resolve a LeafKind, its string value, or a leaf class to the class."""
    if isinstance(kind, type) and issubclass(kind, Leaf):
        return kind
    if isinstance(kind, str):
        try:
            kind = LeafKind(kind)
        except ValueError:
            raise ConfigurationError(f"unknown leaf kind {kind!r}") from None
    return _CLASSES[kind]


def zero_leaf(kind, n: int, block_size: int) -> Leaf:
    return leaf_class(kind).zeros(n, block_size)


def leaf_from_triplets(kind, n, rows, cols, vals, block_size) -> Leaf:
    return leaf_class(kind).from_triplets(n, rows, cols, vals, block_size)


def leaf_from_dense(kind, arr: np.ndarray, block_size: int) -> Leaf:
    return leaf_class(kind).from_dense(arr, block_size)


def decode_leaf(buf: bytes, offset: int = 0) -> Leaf:
    cls = _TAGS.get(buf[offset : offset + 1])
    if cls is None:
        raise ConfigurationError(f"unknown leaf payload tag {buf[offset:offset+1]!r}")
    return cls.decode(buf, offset)


__all__ = [
    "Leaf",
    "LeafKind",
    "DenseLeaf",
    "BlockSparseLeaf",
    "HierarchicalLeaf",
    "leaf_class",
    "zero_leaf",
    "leaf_from_triplets",
    "leaf_from_dense",
    "decode_leaf",
]
