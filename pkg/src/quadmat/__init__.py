"""quadmat: task-parallel sparse quadtree matrices with a chunk runtime."""

from .chunkstore import NIL, Chunk, ChunkId, ChunkStore, TransferSim, WorkerStats
from .engine import Engine, RuntimeConfig, TaskHandle, TaskRegistry, TaskSpec
from .errors import (
    CacheCapacityError,
    ConfigurationError,
    ContractViolationError,
    DeadlockError,
    DimensionMismatchError,
    InvalidHandleError,
    NotPositiveDefiniteError,
    OutOfRangeError,
    PlacementError,
    QuadmatError,
    SizingError,
    StoreCapacityError,
)
from .leaves import LeafKind
from .ops import MultiplyVariant, TruncationSpec, default_registry
from .quadtree import Matrix, MatrixParams, OwnerPolicy, TreeStats
from .session import MatrixSession

__version__ = "0.1.0"

__all__ = [
    "NIL",
    "CacheCapacityError",
    "Chunk",
    "ChunkId",
    "ChunkStore",
    "ConfigurationError",
    "ContractViolationError",
    "DeadlockError",
    "DimensionMismatchError",
    "Engine",
    "InvalidHandleError",
    "LeafKind",
    "Matrix",
    "MatrixParams",
    "MatrixSession",
    "MultiplyVariant",
    "NotPositiveDefiniteError",
    "OutOfRangeError",
    "OwnerPolicy",
    "PlacementError",
    "QuadmatError",
    "RuntimeConfig",
    "SizingError",
    "StoreCapacityError",
    "TaskHandle",
    "TaskRegistry",
    "TaskSpec",
    "TransferSim",
    "TreeStats",
    "TruncationSpec",
    "WorkerStats",
    "default_registry",
    "__version__",
]
