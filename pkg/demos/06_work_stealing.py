"""Watching the scheduler work: stealing, caching, and the event log.

In simulate mode the engine runs P virtual workers deterministically on one
thread, modeling each worker's task deque and chunk cache.  Tasks spawned
by a worker stay with that worker; an idle worker steals the *shallowest*
task (closest to the root, i.e. the largest piece of work) from a victim
chosen by a seeded random sweep.  Fetching a chunk owned by another worker
counts communicated bytes once per cache fill; repeated use hits the cache.

Everything the scheduler does lands in an event log, so claims about the
policy are checkable after the run rather than taken on faith.
"""

from collections import Counter

import numpy as np

from quadmat import MatrixSession

rng = np.random.default_rng(1)
n = 512
m = np.where(np.abs(np.subtract.outer(np.arange(n), np.arange(n))) <= 24,
             rng.standard_normal((n, n)), 0.0)
rows, cols = np.nonzero(m)


def run(workers):
    session = MatrixSession(n_workers=workers, mode="simulate", seed=0,
                            record_events=True)
    a = session.matrix_from_triplets(n, rows, cols, m[rows, cols],
                                     leaf_dim=64, block_size=8)
    session.multiply(a, a)
    return session


print(f"{'P':>3} {'tasks/worker':>16} {'steals':>7} {'bytes received':>15} "
      f"{'hits':>6} {'misses':>7}")
for workers in (1, 2, 4, 8):
    session = run(workers)
    stats = session.last_stats
    tasks = [s.tasks_executed for s in stats]
    print(f"{workers:>3} {f'{min(tasks)}..{max(tasks)}':>16} "
          f"{sum(s.steals for s in stats):>7} "
          f"{sum(s.bytes_received for s in stats):>15} "
          f"{sum(s.cache_hits for s in stats):>6} "
          f"{sum(s.cache_misses for s in stats):>7}")

# One worker never steals and never communicates; more workers trade some
# bytes for spread-out work.

# Replay the 4-worker event log and verify the stated stealing policy:
# every steal took the victim's shallowest (lowest-depth, then oldest)
# ready task at that moment.  Events are plain tuples of
# (kind, worker, task_id, depth, chunk_id, n_bytes).
session = run(4)
ready = {w: {} for w in range(4)}  # worker -> {task id: depth}
steals_checked = 0
for kind, worker, tid, depth, _cid, _nb in session.last_engine.events:
    if kind == "ready":
        ready[worker][tid] = depth
    elif kind == "pop":
        del ready[worker][tid]
    elif kind == "steal":
        victim = next(w for w, tasks in ready.items() if tid in tasks)
        shallowest = min(ready[victim].items(), key=lambda kv: (kv[1], kv[0]))
        assert (tid, depth) == shallowest
        del ready[victim][tid]
        steals_checked += 1
print(f"\nreplayed event log: all {steals_checked} steals took the victim's "
      f"shallowest ready task")

kinds = Counter(e[0] for e in session.last_engine.events)
print("event counts:", dict(sorted(kinds.items())))
