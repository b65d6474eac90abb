import pytest

from quadmat import (
    NIL,
    CacheCapacityError,
    ChunkId,
    ChunkStore,
    ContractViolationError,
    InvalidHandleError,
    StoreCapacityError,
    TransferSim,
)


def test_nil_sentinel():
    assert NIL.is_nil
    assert NIL == ChunkId(0)
    assert repr(NIL) == "NIL"
    store = ChunkStore()
    assert store.norm_of(NIL) == 0.0
    assert NIL not in store
    with pytest.raises(ContractViolationError):
        store.peek(NIL)


def test_register_and_metadata_roundtrip():
    store = ChunkStore()
    cid = store.register(b"payload", owner=3, norm=2.5)
    assert not cid.is_nil
    assert cid in store
    assert store.peek(cid) == b"payload"
    assert store.size_of(cid) == 7
    assert store.owner_of(cid) == 3
    assert store.norm_of(cid) == 2.5
    assert store.total_bytes == 7
    assert store.n_chunks == 1


def test_ids_are_unique_and_payloads_immutable():
    store = ChunkStore()
    data = bytearray(b"abc")
    cid1 = store.register(bytes(data), owner=0)
    data[0] = ord("z")
    cid2 = store.register(bytes(data), owner=0)
    assert cid1 != cid2
    assert store.peek(cid1) == b"abc"
    assert store.peek(cid2) == b"zbc"


def test_empty_payload_rejected():
    store = ChunkStore()
    with pytest.raises(ContractViolationError):
        store.register(b"", owner=0)


def test_unknown_id_raises():
    store = ChunkStore()
    with pytest.raises(InvalidHandleError):
        store.peek(ChunkId(42))


def test_store_capacity_enforced():
    store = ChunkStore(max_bytes=10)
    store.register(b"x" * 8, owner=0)
    with pytest.raises(StoreCapacityError):
        store.register(b"x" * 8, owner=0)


def test_owner_fetch_costs_nothing():
    store = ChunkStore()
    cid = store.register(b"x" * 100, owner=1)
    sim = TransferSim(store, n_workers=2, capacity_bytes=1000)
    assert sim.fetch(cid, reader=1) == b"x" * 100
    assert sim.stats[1].bytes_received == 0
    assert sim.stats[1].cache_hits == 1
    assert sim.stats[1].cache_misses == 0


def test_remote_fetch_transfers_once_then_hits_cache():
    store = ChunkStore()
    cid = store.register(b"x" * 100, owner=0)
    sim = TransferSim(store, n_workers=2, capacity_bytes=1000)
    sim.fetch(cid, reader=1)
    sim.fetch(cid, reader=1)
    st = sim.stats[1]
    assert st.bytes_received == 100
    assert st.cache_misses == 1
    assert st.cache_hits == 1
    kinds = [e.kind for e in sim.events]
    assert kinds == ["miss", "hit"]


def test_lru_eviction_recharges_transfer():
    store = ChunkStore()
    a = store.register(b"a" * 60, owner=0)
    b = store.register(b"b" * 60, owner=0)
    sim = TransferSim(store, n_workers=2, capacity_bytes=100)
    sim.fetch(a, reader=1)          # cache: [a]
    sim.fetch(b, reader=1)          # a evicted (60 + 60 > 100)
    sim.fetch(a, reader=1)          # miss again
    assert sim.stats[1].bytes_received == 180
    assert sim.stats[1].cache_misses == 3


def test_lru_order_refreshed_on_hit():
    store = ChunkStore()
    a = store.register(b"a" * 40, owner=0)
    b = store.register(b"b" * 40, owner=0)
    c = store.register(b"c" * 40, owner=0)
    sim = TransferSim(store, n_workers=2, capacity_bytes=100)
    sim.fetch(a, reader=1)
    sim.fetch(b, reader=1)
    sim.fetch(a, reader=1)          # refresh a; b is now least recent
    sim.fetch(c, reader=1)          # evicts b, not a
    sim.fetch(a, reader=1)
    assert sim.stats[1].cache_hits == 2
    assert sim.stats[1].bytes_received == 120


def test_chunk_larger_than_cache_rejected():
    store = ChunkStore()
    cid = store.register(b"x" * 200, owner=0)
    sim = TransferSim(store, n_workers=2, capacity_bytes=100)
    with pytest.raises(CacheCapacityError):
        sim.fetch(cid, reader=1)
    with pytest.raises(CacheCapacityError):
        TransferSim(store, n_workers=1, capacity_bytes=0)


def test_per_worker_caches_are_independent():
    store = ChunkStore()
    cid = store.register(b"x" * 50, owner=0)
    sim = TransferSim(store, n_workers=3, capacity_bytes=1000)
    sim.fetch(cid, reader=1)
    sim.fetch(cid, reader=2)
    assert sim.stats[1].bytes_received == 50
    assert sim.stats[2].bytes_received == 50
    assert sim.stats[0].bytes_received == 0
