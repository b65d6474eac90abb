"""Versioned little-endian serialization of quadtree node chunks.

Chunk payload layout (version 1):

    u8 version | u8 node_type | u32 level | body

node_type 1 (branch): body = 4 x u64 child chunk ids (0 encodes nil), then
4 x f64 child subtree Frobenius norms, children ordered NW, NE, SW, SE.
node_type 2 (leaf): body = one tagged leaf payload (see quadmat.leaves).

Roundtrips are bit-exact; doubles are stored raw.
"""

from __future__ import annotations

import struct

from .chunkstore import NIL, ChunkId
from .errors import ConfigurationError
from .leaves import Leaf, decode_leaf

VERSION = 1
BRANCH = 1
LEAF = 2

_HDR = struct.Struct("<BBI")
_BRANCH_BODY = struct.Struct("<4Q4d")


def encode_branch(level: int, children: list[ChunkId], child_norms: list[float]) -> bytes:
    ids = [c.id for c in children]
    return _HDR.pack(VERSION, BRANCH, level) + _BRANCH_BODY.pack(*ids, *child_norms)


def encode_leaf_node(level: int, leaf: Leaf) -> bytes:
    return _HDR.pack(VERSION, LEAF, level) + leaf.encode()


def decode_node(buf: bytes):
    """Returns ("branch", level, children, norms) or ("leaf", level, leaf)."""
    version, node_type, level = _HDR.unpack_from(buf, 0)
    if version != VERSION:
        raise ConfigurationError(f"unsupported chunk version {version}")
    if node_type == BRANCH:
        vals = _BRANCH_BODY.unpack_from(buf, _HDR.size)
        children = [ChunkId(i) if i else NIL for i in vals[:4]]
        return "branch", level, children, list(vals[4:])
    if node_type == LEAF:
        return "leaf", level, decode_leaf(buf, _HDR.size)
    raise ConfigurationError(f"unknown node type {node_type}")


def node_is_branch(buf: bytes) -> bool:
    return buf[1] == BRANCH
