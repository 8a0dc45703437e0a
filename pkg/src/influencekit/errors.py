"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid generator / trainer / search configuration."""


class DatasetParseError(ValueError):
    """Malformed dataset file; carries the offending line number (1-based)."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NumericError(RuntimeError):
    """Non-finite value encountered during loss/gradient evaluation."""


class CapacityError(ValueError):
    """Explicit Hessian requested above the materialization size cap."""


class SolverError(RuntimeError):
    """Iterative or direct linear solve failed; message reports the residual."""


class DegenerateGeometryError(ValueError):
    """Influence-vector geometry has zero variance; PCA statistics undefined."""


class DegenerateTrainingError(ValueError):
    """Training set too small to retrain (e.g. leave-one-out on a singleton)."""


class UndefinedChangeError(ValueError):
    """Relative change requested against a zero baseline accuracy."""


class UndefinedCorrelationError(ValueError):
    """Rank correlation against a constant vector."""


class TrimAbortedError(RuntimeError):
    """Trim iteration would empty a class; carries the partial report."""

    def __init__(self, message, partial_report=None):
        self.partial_report = partial_report
        super().__init__(message)


class GaSearchError(RuntimeError):
    """Every GA candidate was LP-infeasible in every generation."""


class CommitRefusedError(RuntimeError):
    """Best candidate carries a sentinel fitness term; weighted epoch not adopted."""


class JobConflictError(RuntimeError):
    """A mutating job is already running on this session."""
