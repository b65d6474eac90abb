"""Task engine: registration, futures, and breadth-first work stealing.

Two execution substrates share the same scheduler state and policies:

* ``simulate`` -- a deterministic single-threaded loop that interleaves
  virtual workers round-robin (one task per worker per tick) and runs the
  per-worker LRU cache model for exact communication accounting.
* ``threaded`` -- real shared-memory threads for wall-time measurements;
  kernels release the GIL, scheduler state is guarded by one lock.  No
  transfer simulation (shared memory moves nothing), so ``bytes_received``
  and cache counters stay zero in this mode.

Tasks are deferred pure functions over chunks.  A task may return a chunk id,
the nil id, or the handle of a task it registered (forwarding).  When any
input id is nil and the task type declares a fallback body, the engine
dispatches the fallback instead (zero-algebra short-circuiting).

Event log records are ``(event_kind, worker, task_id, depth, chunk_id,
bytes)`` with ``None`` for non-applicable fields; kinds: ``register``,
``ready``, ``pop``, ``steal``, ``done``, ``put``, ``hit``, ``miss``.
"""

from __future__ import annotations

import random
import threading
from dataclasses import dataclass, field

from .chunkstore import NIL, ChunkId, ChunkStore, TransferSim, WorkerStats
from .errors import (
    CacheCapacityError,
    ConfigurationError,
    ContractViolationError,
    DeadlockError,
    InvalidHandleError,
)


@dataclass(frozen=True)
class TaskHandle:
    id: int


@dataclass
class TaskSpec:
    task_type: str
    inputs: list
    args: dict = field(default_factory=dict)
    depth: int = 0
    parent: int | None = None


@dataclass
class RuntimeConfig:
    n_workers: int = 1
    cache_capacity_bytes: int = 64 * 2**20
    seed: int = 0
    steal_policy: str = "breadth-first"

    def validate(self):
        if self.n_workers < 1:
            raise ConfigurationError("n_workers must be >= 1")
        if self.steal_policy != "breadth-first":
            raise ConfigurationError(f"unsupported steal policy {self.steal_policy!r}")
        if self.cache_capacity_bytes <= 0:
            raise ConfigurationError("cache capacity must be positive")


class TaskRegistry:
    def __init__(self):
        self._types: dict[str, tuple] = {}

    def register(self, name: str, execute, fallback=None):
        self._types[name] = (execute, fallback)

    def lookup(self, name: str):
        entry = self._types.get(name)
        if entry is None:
            raise ConfigurationError(f"unknown task type {name!r}")
        return entry

    def __contains__(self, name):
        return name in self._types


class _Task:
    __slots__ = (
        "id", "spec", "owner", "resolved", "unresolved", "done",
        "result", "waiters", "forward_waiters", "unbound",
    )

    def __init__(self, tid, spec, owner, unbound=False):
        self.id = tid
        self.spec = spec
        self.owner = owner
        self.resolved = [] if spec is None else list(spec.inputs)
        self.unresolved = 0
        self.done = False
        self.result = None
        self.waiters = []          # (task, slot) pairs waiting on this result as input
        self.forward_waiters = []  # tasks that forwarded to this one
        self.unbound = unbound


class TaskContext:
    """Execution-side API handed to task bodies."""

    def __init__(self, engine: "Engine", worker: int, task: _Task):
        self._engine = engine
        self.worker = worker
        self._task = task

    def fetch(self, cid: ChunkId) -> bytes:
        return self._engine._fetch(cid, self.worker)

    def put(self, payload: bytes, norm: float = 0.0) -> ChunkId:
        return self._engine._put(payload, self.worker, norm)

    def norm_of(self, cid: ChunkId) -> float:
        return self._engine.store.norm_of(cid)

    def size_of(self, cid: ChunkId) -> int:
        return self._engine.store.size_of(cid)

    def spawn(self, task_type: str, inputs: list, args: dict | None = None) -> TaskHandle:
        spec = TaskSpec(
            task_type, inputs, args or {},
            depth=self._task.spec.depth + 1, parent=self._task.id,
        )
        with self._engine._lock:
            return self._engine._register(spec, self.worker)

    def log_prune(self, value: float):
        self._engine.log_prune(value)


class Engine:
    def __init__(
        self,
        store: ChunkStore,
        registry: TaskRegistry,
        config: RuntimeConfig | None = None,
        mode: str = "simulate",
        record_events: bool = False,
    ):
        if mode not in ("simulate", "threaded"):
            raise ConfigurationError(f"unknown mode {mode!r}")
        config = config or RuntimeConfig()
        config.validate()
        self.store = store
        self.registry = registry
        self.config = config
        self.mode = mode
        self.record_events = record_events
        self.events: list[tuple] = []
        self.prune_log: list[float] = []
        self._tasks: dict[int, _Task] = {}
        self._next_task_id = 1
        self._ready: list[list[_Task]] = [[] for _ in range(config.n_workers)]
        self._incomplete = 0
        self._lock = threading.RLock()
        self._cond = threading.Condition(self._lock)
        self._stats: list[WorkerStats] = []
        self._cache: TransferSim | None = None
        self._steal_rngs = [
            random.Random(config.seed * 6364136223846793005 + w + 1)
            for w in range(config.n_workers)
        ]

    # -- event helpers ------------------------------------------------------
    def _event(self, kind, worker=None, task_id=None, depth=None, chunk_id=None, nbytes=None):
        if self.record_events:
            self.events.append((kind, worker, task_id, depth, chunk_id, nbytes))

    def write_event_log(self, path):
        """Plain-text event log: `event_kind,worker,task_id,depth,chunk_id,bytes`."""
        with open(path, "w") as fh:
            fh.write("event_kind,worker,task_id,depth,chunk_id,bytes\n")
            for rec in self.events:
                fh.write(",".join("" if v is None else str(v) for v in rec) + "\n")

    # -- registration --------------------------------------------------------
    def register_task(self, spec: TaskSpec, worker: int = 0) -> TaskHandle:
        """Driver-side task registration (defaults to worker 0's deque)."""
        with self._lock:
            return self._register(spec, worker)

    def unbound_future(self) -> TaskHandle:
        """A handle that never resolves; testing hook for deadlock handling."""
        with self._lock:
            tid = self._next_task_id
            self._next_task_id += 1
            self._tasks[tid] = _Task(tid, None, 0, unbound=True)
            return TaskHandle(tid)

    def _register(self, spec: TaskSpec, worker: int) -> TaskHandle:
        self.registry.lookup(spec.task_type)
        for inp in spec.inputs:
            if isinstance(inp, TaskHandle):
                if inp.id not in self._tasks:
                    raise InvalidHandleError(f"unknown task handle {inp.id}")
            elif isinstance(inp, ChunkId):
                if not inp.is_nil and inp not in self.store:
                    raise InvalidHandleError(f"input chunk {inp.id} not in store")
            else:
                raise ContractViolationError(f"bad task input {inp!r}")
        tid = self._next_task_id
        self._next_task_id += 1
        task = _Task(tid, spec, worker)
        self._tasks[tid] = task
        self._incomplete += 1
        self._event("register", worker, tid, spec.depth)
        for slot, inp in enumerate(spec.inputs):
            if isinstance(inp, TaskHandle):
                dep = self._tasks[inp.id]
                if dep.done:
                    task.resolved[slot] = dep.result
                else:
                    task.unresolved += 1
                    dep.waiters.append((task, slot))
        if task.unresolved == 0:
            self._push_ready(task)
        return TaskHandle(tid)

    def _push_ready(self, task: _Task):
        self._ready[task.owner].append(task)
        self._event("ready", task.owner, task.id, task.spec.depth)
        self._cond.notify_all()

    # -- future resolution ----------------------------------------------------
    def _complete(self, task: _Task, result: ChunkId, worker: int):
        task.done = True
        task.result = result
        self._incomplete -= 1
        size = 0 if result.is_nil else self.store.size_of(result)
        self._event("done", worker, task.id, task.spec.depth, result.id, size)
        for waiter, slot in task.waiters:
            waiter.resolved[slot] = result
            waiter.unresolved -= 1
            if waiter.unresolved == 0:
                self._push_ready(waiter)
        task.waiters.clear()
        for fw in task.forward_waiters:
            self._complete(fw, result, worker)
        task.forward_waiters.clear()

    def result_of(self, handle: TaskHandle) -> ChunkId:
        task = self._tasks[handle.id]
        if not task.done:
            raise ContractViolationError(f"task {handle.id} has not completed")
        return task.result

    # -- chunk plane -----------------------------------------------------------
    def _put(self, payload: bytes, worker: int, norm: float) -> ChunkId:
        if self.mode == "simulate" and len(payload) > self.config.cache_capacity_bytes:
            raise CacheCapacityError(
                f"chunk of {len(payload)} bytes exceeds cache capacity "
                f"{self.config.cache_capacity_bytes}"
            )
        cid = self.store.register(payload, worker, norm)
        with self._lock:
            self._event("put", worker, None, None, cid.id, len(payload))
        return cid

    def _fetch(self, cid: ChunkId, worker: int) -> bytes:
        if cid.is_nil:
            raise ContractViolationError("task fetched the nil chunk id")
        if self._cache is not None:
            with self._lock:
                return self._cache.fetch(cid, worker)
        return self.store.peek(cid)

    def log_prune(self, value: float):
        with self._lock:
            self.prune_log.append(value)

    # -- scheduling -------------------------------------------------------------
    def _pop_own(self, worker: int) -> _Task | None:
        deque = self._ready[worker]
        if deque:
            task = deque.pop()
            self._event("pop", worker, task.id, task.spec.depth)
            return task
        return None

    def _steal(self, thief: int) -> _Task | None:
        others = [w for w in range(self.config.n_workers) if w != thief]
        if not others:
            return None
        order = self._steal_rngs[thief].sample(others, len(others))
        for victim in order:
            deque = self._ready[victim]
            if not deque:
                continue
            best = min(range(len(deque)), key=lambda i: (deque[i].spec.depth, deque[i].id))
            task = deque.pop(best)
            self._stats[thief].steals += 1
            self._event("steal", thief, task.id, task.spec.depth)
            return task
        return None

    def _execute(self, task: _Task, worker: int):
        execute, fallback = self.registry.lookup(task.spec.task_type)
        inputs = task.resolved
        body = execute
        if fallback is not None and any(isinstance(c, ChunkId) and c.is_nil for c in inputs):
            body = fallback
        ctx = TaskContext(self, worker, task)
        out = body(ctx, inputs, task.spec.args)
        self._stats[worker].tasks_executed += 1
        with self._lock:
            if isinstance(out, ChunkId):
                self._complete(task, out, worker)
            elif isinstance(out, TaskHandle):
                target = self._tasks.get(out.id)
                if target is None:
                    raise InvalidHandleError(f"forwarded to unknown task {out.id}")
                if target.done:
                    self._complete(task, target.result, worker)
                else:
                    target.forward_waiters.append(task)
            else:
                raise ContractViolationError(
                    f"task body returned {out!r}; expected ChunkId or TaskHandle"
                )
            self._cond.notify_all()

    # -- run loops ----------------------------------------------------------------
    def run_to_completion(self) -> list[WorkerStats]:
        cfg = self.config
        self._stats = [WorkerStats(w) for w in range(cfg.n_workers)]
        if self.mode == "simulate":
            if self.store.max_chunk_bytes > cfg.cache_capacity_bytes:
                raise CacheCapacityError(
                    f"cache capacity {cfg.cache_capacity_bytes} does not hold the "
                    f"largest chunk ({self.store.max_chunk_bytes} bytes)"
                )
            self._cache = TransferSim(
                self.store, cfg.n_workers, cfg.cache_capacity_bytes,
                stats=self._stats,
                event_cb=lambda kind, w, cid, nb: self._event(kind, w, None, None, cid, nb),
            )
            self._run_simulated()
        else:
            self._cache = None
            self._run_threaded()
        return self._stats

    def _blocked_task_message(self) -> str:
        for task in self._tasks.values():
            if task.spec is not None and not task.done and task.unresolved > 0:
                return (
                    f"deadlock: task {task.id} ({task.spec.task_type}) waits on "
                    f"{task.unresolved} input(s) that will never be produced"
                )
        return "deadlock: unresolved tasks remain but none are runnable"

    def _run_simulated(self):
        n = self.config.n_workers
        while self._incomplete > 0:
            progressed = False
            for w in range(n):
                task = self._pop_own(w) or self._steal(w)
                if task is not None:
                    self._execute(task, w)
                    progressed = True
            if not progressed:
                raise DeadlockError(self._blocked_task_message())

    def _run_threaded(self):
        n = self.config.n_workers
        errors: list[BaseException] = []
        idle = [0]

        def loop(w: int):
            while True:
                with self._lock:
                    if errors:
                        self._cond.notify_all()
                        return
                    task = self._pop_own(w) or self._steal(w)
                    if task is None:
                        if self._incomplete == 0:
                            self._cond.notify_all()
                            return
                        idle[0] += 1
                        if idle[0] == n:
                            errors.append(DeadlockError(self._blocked_task_message()))
                            self._cond.notify_all()
                            return
                        self._cond.wait(timeout=0.5)
                        idle[0] -= 1
                        continue
                try:
                    self._execute(task, w)
                except BaseException as exc:  # surface worker failures to the driver
                    with self._lock:
                        errors.append(exc)
                        self._cond.notify_all()
                    return

        threads = [threading.Thread(target=loop, args=(w,), daemon=True) for w in range(n)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        if errors:
            raise errors[0]

    # convenience for tests/drivers
    def run_task(self, spec: TaskSpec, worker: int = 0) -> ChunkId:
        handle = self.register_task(spec, worker)
        self.run_to_completion()
        return self.result_of(handle)
