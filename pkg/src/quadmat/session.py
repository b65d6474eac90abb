"""High-level driver API: one store, one engine run per operation."""

from __future__ import annotations

import pickle

import numpy as np

from . import ops, quadtree
from .chunkstore import NIL, ChunkStore, WorkerStats
from .engine import Engine, RuntimeConfig, TaskSpec
from .errors import ConfigurationError, ContractViolationError
from .leaves import LeafKind, leaf_class
from .ops import MultiplyVariant, TruncationSpec
from .quadtree import Matrix, MatrixParams, OwnerPolicy

_MODES = ("simulate", "threaded")


class MatrixSession:
    """Owns a chunk store and runs each operation to completion on an engine.

    ``mode="simulate"`` runs virtual workers round-robin with communication
    accounting (per-worker caches, byte counters); ``mode="threaded"`` runs
    real threads sharing the same scheduler.  Chunks persist in the store
    across operations, so results can feed later calls.
    """

    def __init__(
        self,
        n_workers: int = 1,
        mode: str = "simulate",
        cache_capacity_bytes: int = 64 << 20,
        seed: int = 0,
        store_capacity_bytes: int | None = None,
        record_events: bool = False,
    ):
        if mode not in _MODES:
            raise ConfigurationError(f"mode must be one of {_MODES}, got {mode!r}")
        self.store = ChunkStore(store_capacity_bytes)
        self.registry = ops.default_registry()
        self.config = RuntimeConfig(
            n_workers=n_workers, cache_capacity_bytes=cache_capacity_bytes, seed=seed
        )
        self.config.validate()
        self.mode = mode
        self.record_events = record_events
        self.last_engine: Engine | None = None
        self.last_stats: list[WorkerStats] | None = None

    # -- engine plumbing ------------------------------------------------------

    def run_spec(self, spec: TaskSpec):
        engine = Engine(
            self.store,
            self.registry,
            self.config,
            mode=self.mode,
            record_events=self.record_events,
        )
        handle = engine.register_task(spec)
        self.last_stats = engine.run_to_completion()
        self.last_engine = engine
        return engine.result_of(handle)

    @property
    def owner_policy(self) -> OwnerPolicy:
        return OwnerPolicy(self.config.n_workers)

    # -- construction ---------------------------------------------------------

    def matrix_from_triplets(
        self,
        n: int,
        rows,
        cols,
        vals,
        leaf_dim: int = 128,
        leaf_kind: LeafKind | str = LeafKind.BLOCK_SPARSE,
        block_size: int = 16,
        symmetric: bool = False,
    ) -> Matrix:
        kind = leaf_class(leaf_kind).kind
        params = MatrixParams.create(n, leaf_dim)
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        if symmetric:
            if np.any(rows > cols):
                raise ContractViolationError(
                    "symmetric matrices are built from upper-triangle triplets"
                )
            # Diagonal leaves store full blocks: mirror off-diagonal entries
            # that land inside a diagonal leaf tile.
            mirror = (rows != cols) & (rows // leaf_dim == cols // leaf_dim)
            rows, cols = (
                np.concatenate([rows, cols[mirror]]),
                np.concatenate([cols, rows[mirror]]),
            )
            vals = np.concatenate([vals, vals[mirror]])
        root = quadtree.build_from_triplets(
            self.store, params, rows, cols, vals, kind, block_size, self.owner_policy
        )
        return Matrix(root, params, kind, block_size, symmetric)

    def zeros(
        self,
        n: int,
        leaf_dim: int = 128,
        leaf_kind: LeafKind | str = LeafKind.BLOCK_SPARSE,
        block_size: int = 16,
        symmetric: bool = False,
        explicit: bool = False,
    ) -> Matrix:
        kind = leaf_class(leaf_kind).kind
        leaf_class(leaf_kind).zeros(leaf_dim, block_size)  # validate shapes now
        params = MatrixParams.create(n, leaf_dim)
        if explicit:
            root = quadtree.explicit_zeros(
                self.store, params, kind, block_size, self.owner_policy
            )
        else:
            root = NIL
        return Matrix(root, params, kind, block_size, symmetric)

    def identity(
        self,
        n: int,
        c: float = 1.0,
        leaf_dim: int = 128,
        leaf_kind: LeafKind | str = LeafKind.BLOCK_SPARSE,
        block_size: int = 16,
        symmetric: bool = False,
    ) -> Matrix:
        return self.add_scaled_identity(
            self.zeros(n, leaf_dim, leaf_kind, block_size, symmetric=symmetric), c
        )

    def load_coordinate(self, path, leaf_dim: int = 128, leaf_kind="block_sparse",
                        block_size: int = 16, symmetric: bool = False) -> Matrix:
        n, rows, cols, vals = quadtree.read_coordinate_text(path)
        return self.matrix_from_triplets(
            n, rows, cols, vals, leaf_dim, leaf_kind, block_size, symmetric
        )

    # -- operations -----------------------------------------------------------

    def add(self, a: Matrix, b: Matrix, alpha: float = 1.0, beta: float = 1.0) -> Matrix:
        root = self.run_spec(ops.add_spec(a, b, alpha, beta))
        return Matrix(root, a.params, a.leaf_kind, a.block_size, a.symmetric)

    def scale(self, a: Matrix, alpha: float) -> Matrix:
        root = self.run_spec(ops.scale_spec(a, alpha))
        return Matrix(root, a.params, a.leaf_kind, a.block_size, a.symmetric)

    def add_scaled_identity(self, a: Matrix, c: float) -> Matrix:
        root = self.run_spec(ops.add_scaled_identity_spec(a, c))
        return Matrix(root, a.params, a.leaf_kind, a.block_size, a.symmetric)

    def multiply(
        self,
        a: Matrix,
        b: Matrix | None = None,
        variant: MultiplyVariant | str = "regular",
        tau: float = 0.0,
    ) -> Matrix:
        if isinstance(variant, str):
            variant = MultiplyVariant(variant, tau)
        spec, upper = ops.multiply_spec(a, b, variant)
        root = self.run_spec(spec)
        return Matrix(root, a.params, a.leaf_kind, a.block_size, upper)

    def truncate(self, a: Matrix, spec: TruncationSpec | float) -> tuple[Matrix, float]:
        if not isinstance(spec, TruncationSpec):
            spec = TruncationSpec(float(spec))
        if a.root.is_nil or spec.tau == 0.0:
            return a, 0.0
        census_cid = self.run_spec(ops.census_spec(a))
        blob = pickle.loads(self.store.peek(census_cid))
        drops, removed = ops.plan_drops(blob, spec.tau)
        if not drops:
            return a, 0.0
        drops_cid = self.store.register(pickle.dumps(drops), owner=0, norm=0.0)
        root = self.run_spec(ops.rewrite_spec(a, drops_cid))
        return Matrix(root, a.params, a.leaf_kind, a.block_size, a.symmetric), removed

    def inverse_cholesky(self, a: Matrix) -> Matrix:
        root = self.run_spec(ops.inverse_cholesky_spec(a))
        return Matrix(root, a.params, a.leaf_kind, a.block_size, False)

    def assign_from_triplets(
        self, n, rows, cols, vals, leaf_dim: int = 128,
        leaf_kind="block_sparse", block_size: int = 16,
    ) -> Matrix:
        kind = leaf_class(leaf_kind).kind
        spec = ops.assign_spec(n, leaf_dim, rows, cols, vals, kind, block_size)
        root = self.run_spec(spec)
        return Matrix(root, MatrixParams.create(n, leaf_dim), kind, block_size, False)

    def extract_elements(self, a: Matrix, rows, cols) -> np.ndarray:
        rows, cols = self._map_symmetric(a, rows, cols)
        cid = self.run_spec(ops.extract_spec(a, rows, cols))
        return pickle.loads(self.store.peek(cid))

    # -- inspection -----------------------------------------------------------

    def get_elements(self, a: Matrix, rows, cols) -> np.ndarray:
        rows, cols = self._map_symmetric(a, rows, cols)
        return quadtree.get_elements(self.store, a.params, a.root, rows, cols)

    @staticmethod
    def _map_symmetric(a: Matrix, rows, cols):
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        if a.symmetric:
            swap = rows > cols
            rows, cols = np.where(swap, cols, rows), np.where(swap, rows, cols)
        return rows, cols

    def to_dense(self, a: Matrix) -> np.ndarray:
        return quadtree.tree_to_dense(self.store, a)

    def tree_stats(self, a: Matrix) -> quadtree.TreeStats:
        return quadtree.tree_stats(self.store, a.root)

    def canonical(self, a: Matrix) -> bytes:
        return quadtree.canonical_bytes(self.store, a.root)

    def norm(self, a: Matrix) -> float:
        return self.store.norm_of(a.root)

    def write_coordinate(self, a: Matrix, path):
        quadtree.write_coordinate_text(self.store, a, path)

    def total_bytes_received(self) -> int:
        if not self.last_stats:
            return 0
        return sum(s.bytes_received for s in self.last_stats)
