"""Exception types used across quadmat."""


class QuadmatError(Exception):
    """Base class for all quadmat errors."""


class ConfigurationError(QuadmatError):
    """Invalid or inconsistent configuration (unknown task type, mixed
    leaf kinds, bad runtime parameters)."""


class InvalidHandleError(QuadmatError):
    """A chunk id that was never issued by this store."""


class ContractViolationError(QuadmatError):
    """API misuse, e.g. dereferencing the nil chunk id."""


class StoreCapacityError(QuadmatError):
    """The chunk store's byte budget is exhausted."""


class CacheCapacityError(ConfigurationError):
    """A chunk is larger than the per-worker cache capacity."""


class DeadlockError(QuadmatError):
    """No runnable task remains while results are still unresolved."""


class DimensionMismatchError(QuadmatError):
    """Operands do not conform (dimensions or matrix parameters)."""


class OutOfRangeError(QuadmatError, IndexError):
    """A row/column index outside the logical matrix range."""


class NotPositiveDefiniteError(QuadmatError):
    """Cholesky breakdown; carries the global diagonal index."""

    def __init__(self, index: int, message: str | None = None):
        self.index = index
        super().__init__(message or f"matrix not positive definite near diagonal index {index}")


class PlacementError(QuadmatError):
    """Random block placement could not satisfy the no-overlap constraint."""


class SizingError(QuadmatError):
    """A benchmark configuration that would not fit in memory; carries a
    suggested smaller dimension."""

    def __init__(self, message: str, suggested_n: int | None = None):
        self.suggested_n = suggested_n
        super().__init__(message)
