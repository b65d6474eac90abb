"""Immutable chunk store and the per-worker transfer/cache simulation.

A chunk is a registered, immutable byte payload identified by a ``ChunkId``.
The distinguished ``NIL`` id stands for an identically-zero subtree and never
resolves to a payload.  Besides the payload, the store keeps small id-carried
metadata (size, owner, Frobenius norm) that travels with the identifier and
can be read without fetching the payload -- branch assembly and norm-based
pruning rely on this.
"""

from __future__ import annotations

import threading
from collections import OrderedDict
from dataclasses import dataclass, field

from .errors import (
    CacheCapacityError,
    ContractViolationError,
    InvalidHandleError,
    StoreCapacityError,
)

WorkerId = int


@dataclass(frozen=True)
class ChunkId:
    """Opaque handle to a registered chunk.  ``id == 0`` is reserved for NIL."""

    id: int

    @property
    def is_nil(self) -> bool:
        return self.id == 0

    def __repr__(self):
        return "NIL" if self.id == 0 else f"ChunkId({self.id})"


NIL = ChunkId(0)


@dataclass(frozen=True)
class Chunk:
    """Metadata record for one registered chunk (payload held by the store)."""

    payload: bytes
    size_bytes: int
    owner: WorkerId
    norm: float


@dataclass
class WorkerStats:
    """Per-virtual-worker accounting for one engine run."""

    worker: WorkerId
    tasks_executed: int = 0
    steals: int = 0
    bytes_received: int = 0
    cache_hits: int = 0
    cache_misses: int = 0


class ChunkStore:
    """Thread-safe registry of immutable chunks.

    ``max_bytes`` optionally bounds total stored payload bytes; exceeding it
    raises :class:`StoreCapacityError`.
    """

    def __init__(self, max_bytes: int | None = None):
        self._chunks: dict[int, Chunk] = {}
        self._next_id = 1
        self._total_bytes = 0
        self._max_chunk_bytes = 0
        self._max_bytes = max_bytes
        self._lock = threading.Lock()

    def register(self, payload: bytes, owner: WorkerId, norm: float = 0.0) -> ChunkId:
        if not payload:
            raise ContractViolationError("cannot register an empty payload")
        size = len(payload)
        with self._lock:
            if self._max_bytes is not None and self._total_bytes + size > self._max_bytes:
                raise StoreCapacityError(
                    f"store capacity exhausted: {self._total_bytes} + {size} "
                    f"> {self._max_bytes} bytes"
                )
            cid = ChunkId(self._next_id)
            self._next_id += 1
            self._chunks[cid.id] = Chunk(bytes(payload), size, owner, float(norm))
            self._total_bytes += size
            if size > self._max_chunk_bytes:
                self._max_chunk_bytes = size
        return cid

    def _record(self, cid: ChunkId) -> Chunk:
        if cid.is_nil:
            raise ContractViolationError("nil chunk id cannot be dereferenced")
        rec = self._chunks.get(cid.id)
        if rec is None:
            raise InvalidHandleError(f"unknown chunk id {cid.id}")
        return rec

    def peek(self, cid: ChunkId) -> bytes:
        """Payload access without transfer accounting (driver-side reads)."""
        return self._record(cid).payload

    def meta(self, cid: ChunkId) -> Chunk:
        return self._record(cid)

    def size_of(self, cid: ChunkId) -> int:
        return self._record(cid).size_bytes

    def norm_of(self, cid: ChunkId) -> float:
        if cid.is_nil:
            return 0.0
        return self._record(cid).norm

    def owner_of(self, cid: ChunkId) -> WorkerId:
        return self._record(cid).owner

    def __contains__(self, cid: ChunkId) -> bool:
        return not cid.is_nil and cid.id in self._chunks

    @property
    def total_bytes(self) -> int:
        return self._total_bytes

    @property
    def max_chunk_bytes(self) -> int:
        return self._max_chunk_bytes

    @property
    def n_chunks(self) -> int:
        return len(self._chunks)


@dataclass
class CacheEvent:
    kind: str  # "hit" | "miss"
    worker: WorkerId
    chunk_id: int
    bytes: int


class TransferSim:
    """Per-worker LRU cache simulation over remote chunk fetches.

    Each worker's own chunks are pinned at the owner and never consume cache
    budget.  A remote fetch that misses the reader's cache transfers
    ``size_bytes`` (accounted in ``WorkerStats.bytes_received``) and inserts
    the chunk into the reader's LRU cache, evicting least-recently-used
    entries until the byte capacity is respected.
    """

    def __init__(
        self,
        store: ChunkStore,
        n_workers: int,
        capacity_bytes: int,
        stats: list[WorkerStats] | None = None,
        event_cb=None,
    ):
        if capacity_bytes <= 0:
            raise CacheCapacityError("cache capacity must be positive")
        self.store = store
        self.capacity = capacity_bytes
        self.stats = stats if stats is not None else [WorkerStats(w) for w in range(n_workers)]
        self._caches: list[OrderedDict[int, int]] = [OrderedDict() for _ in range(n_workers)]
        self._cached_bytes = [0] * n_workers
        self.events: list[CacheEvent] = []
        self._event_cb = event_cb

    def validate_chunk_size(self, size: int):
        if size > self.capacity:
            raise CacheCapacityError(
                f"chunk of {size} bytes exceeds cache capacity {self.capacity}"
            )

    def _note(self, kind: str, reader: WorkerId, cid: ChunkId, nbytes: int):
        self.events.append(CacheEvent(kind, reader, cid.id, nbytes))
        if self._event_cb is not None:
            self._event_cb(kind, reader, cid.id, nbytes)

    def fetch(self, cid: ChunkId, reader: WorkerId) -> bytes:
        rec = self.store.meta(cid)
        st = self.stats[reader]
        if rec.owner == reader:
            st.cache_hits += 1
            self._note("hit", reader, cid, 0)
            return rec.payload
        cache = self._caches[reader]
        if cid.id in cache:
            cache.move_to_end(cid.id)
            st.cache_hits += 1
            self._note("hit", reader, cid, 0)
            return rec.payload
        self.validate_chunk_size(rec.size_bytes)
        st.cache_misses += 1
        st.bytes_received += rec.size_bytes
        self._note("miss", reader, cid, rec.size_bytes)
        cache[cid.id] = rec.size_bytes
        self._cached_bytes[reader] += rec.size_bytes
        while self._cached_bytes[reader] > self.capacity:
            _, evicted = cache.popitem(last=False)
            self._cached_bytes[reader] -= evicted
        return rec.payload
