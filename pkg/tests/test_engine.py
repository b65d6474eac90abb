import pytest

from quadmat import (
    NIL,
    ChunkStore,
    ConfigurationError,
    ContractViolationError,
    DeadlockError,
    Engine,
    InvalidHandleError,
    RuntimeConfig,
    TaskRegistry,
    TaskSpec,
)


def toy_registry() -> TaskRegistry:
    reg = TaskRegistry()

    def emit(ctx, inputs, args):
        return ctx.put(args["data"])

    def concat(ctx, inputs, args):
        payload = b"".join(ctx.fetch(c) for c in inputs)
        return ctx.put(payload)

    def concat_fallback(ctx, inputs, args):
        live = [c for c in inputs if not c.is_nil]
        if not live:
            return NIL
        return ctx.put(b"".join(ctx.fetch(c) for c in live))

    def fan(ctx, inputs, args):
        left = ctx.spawn("emit", [], {"data": b"L"})
        right = ctx.spawn("emit", [], {"data": b"R"})
        return ctx.spawn("concat", [left, right], {})

    def tree(ctx, inputs, args):
        if args["depth"] == 0:
            return ctx.put(b"x")
        kids = [ctx.spawn("tree", [], {"depth": args["depth"] - 1}) for _ in range(4)]
        return ctx.spawn("concat", kids, {})

    def bad(ctx, inputs, args):
        return "not a chunk id"

    reg.register("emit", emit)
    reg.register("concat", concat, concat_fallback)
    reg.register("fan", fan)
    reg.register("tree", tree)
    reg.register("bad", bad)
    return reg


def make_engine(n_workers=1, mode="simulate", seed=0, record_events=False):
    return Engine(
        ChunkStore(),
        toy_registry(),
        RuntimeConfig(n_workers=n_workers, seed=seed),
        mode=mode,
        record_events=record_events,
    )


@pytest.mark.parametrize("mode", ["simulate", "threaded"])
def test_single_task(mode):
    eng = make_engine(2, mode)
    cid = eng.run_task(TaskSpec("emit", [], {"data": b"hello"}))
    assert eng.store.peek(cid) == b"hello"


@pytest.mark.parametrize("mode", ["simulate", "threaded"])
def test_future_inputs_resolve_in_registration_order(mode):
    eng = make_engine(2, mode)
    h1 = eng.register_task(TaskSpec("emit", [], {"data": b"a"}))
    h2 = eng.register_task(TaskSpec("emit", [], {"data": b"b"}))
    h3 = eng.register_task(TaskSpec("concat", [h1, h2], {}))
    eng.run_to_completion()
    assert eng.store.peek(eng.result_of(h3)) == b"ab"


@pytest.mark.parametrize("mode", ["simulate", "threaded"])
def test_forwarding_returns_child_result(mode):
    eng = make_engine(2, mode)
    cid = eng.run_task(TaskSpec("fan", [], {}))
    assert eng.store.peek(cid) == b"LR"


def test_result_of_incomplete_task_raises():
    eng = make_engine()
    h = eng.register_task(TaskSpec("emit", [], {"data": b"x"}))
    with pytest.raises(ContractViolationError):
        eng.result_of(h)


@pytest.mark.parametrize("mode", ["simulate", "threaded"])
def test_fallback_dispatched_on_any_nil_input(mode):
    eng = make_engine(2, mode)
    live = eng.store.register(b"v", owner=0)
    cid = eng.run_task(TaskSpec("concat", [NIL, live], {}))
    assert eng.store.peek(cid) == b"v"
    cid = eng.run_task(TaskSpec("concat", [NIL, NIL], {}))
    assert cid.is_nil


def test_task_without_fallback_just_runs():
    eng = make_engine()
    with pytest.raises(ContractViolationError):
        # emit has no fallback and no inputs; bad return type surfaces instead
        eng.run_task(TaskSpec("bad", [], {}))


def test_registration_validates_type_and_inputs():
    eng = make_engine()
    with pytest.raises(ConfigurationError):
        eng.register_task(TaskSpec("nope", [], {}))
    from quadmat import ChunkId, TaskHandle

    with pytest.raises(InvalidHandleError):
        eng.register_task(TaskSpec("concat", [TaskHandle(999)], {}))
    with pytest.raises(InvalidHandleError):
        eng.register_task(TaskSpec("concat", [ChunkId(999)], {}))
    with pytest.raises(ContractViolationError):
        eng.register_task(TaskSpec("concat", ["junk"], {}))


@pytest.mark.parametrize("mode", ["simulate", "threaded"])
def test_deadlock_names_the_blocked_task_type(mode):
    eng = make_engine(2, mode)
    pending = eng.unbound_future()
    eng.register_task(TaskSpec("concat", [pending], {}))
    with pytest.raises(DeadlockError, match="concat"):
        eng.run_to_completion()


def test_single_worker_neither_steals_nor_transfers():
    eng = make_engine(1)
    eng.run_task(TaskSpec("tree", [], {"depth": 3}))
    stats = eng._stats
    assert stats[0].steals == 0
    assert stats[0].bytes_received == 0
    assert stats[0].tasks_executed > 1


def test_stats_account_all_tasks_once():
    eng = make_engine(4)
    eng.run_task(TaskSpec("tree", [], {"depth": 3}))
    total = sum(s.tasks_executed for s in eng._stats)
    # 1 + 4 + 16 + 64 tree tasks plus 1 + 4 + 16 concat tasks
    assert total == 85 + 21


def test_simulate_event_log_is_seed_deterministic():
    logs = []
    for _ in range(2):
        eng = make_engine(4, seed=7, record_events=True)
        eng.run_task(TaskSpec("tree", [], {"depth": 3}))
        logs.append(list(eng.events))
    assert logs[0] == logs[1]


def test_steals_take_the_shallowest_task_of_the_victim():
    eng = make_engine(4, seed=3, record_events=True)
    eng.run_task(TaskSpec("tree", [], {"depth": 4}))
    assert sum(s.steals for s in eng._stats) > 0

    ready: dict[int, dict[int, int]] = {w: {} for w in range(4)}  # worker -> {tid: depth}
    for kind, worker, tid, depth, _cid, _nb in eng.events:
        if kind == "ready":
            ready[worker][tid] = depth
        elif kind == "pop":
            del ready[worker][tid]
        elif kind == "steal":
            victim = next(w for w, d in ready.items() if tid in d)
            assert victim != worker
            shallowest = min(ready[victim].items(), key=lambda kv: (kv[1], kv[0]))
            assert (tid, depth) == (shallowest[0], shallowest[1])
            del ready[victim][tid]
    assert all(not d for d in ready.values())


def test_threaded_matches_simulate_result():
    results = []
    for mode in ("simulate", "threaded"):
        eng = make_engine(4, mode)
        cid = eng.run_task(TaskSpec("tree", [], {"depth": 3}))
        results.append(eng.store.peek(cid))
    assert results[0] == results[1] == b"x" * 64


def test_threaded_worker_errors_surface():
    eng = make_engine(3, "threaded")
    with pytest.raises(ContractViolationError):
        eng.run_task(TaskSpec("bad", [], {}))


def test_event_log_file_format(tmp_path):
    eng = make_engine(2, record_events=True)
    eng.run_task(TaskSpec("fan", [], {}))
    path = tmp_path / "events.csv"
    eng.write_event_log(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "event_kind,worker,task_id,depth,chunk_id,bytes"
    kinds = {line.split(",")[0] for line in lines[1:]}
    assert {"register", "ready", "pop", "done", "put"} <= kinds
    assert all(len(line.split(",")) == 6 for line in lines[1:])


def test_config_validation():
    with pytest.raises(ConfigurationError):
        RuntimeConfig(n_workers=0).validate()
    with pytest.raises(ConfigurationError):
        RuntimeConfig(steal_policy="lifo").validate()
    with pytest.raises(ConfigurationError):
        RuntimeConfig(cache_capacity_bytes=0).validate()
    with pytest.raises(ConfigurationError):
        Engine(ChunkStore(), toy_registry(), mode="distributed")
