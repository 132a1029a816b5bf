"""Exception types shared across the package."""


class InputError(ValueError):
    """Caller violated a documented precondition (shapes, ranges, formats)."""


class DivergenceError(RuntimeError):
    """Backtracking search exceeded its cap; the supplied constants are wrong."""


class ToleranceNotMet(RuntimeError):
    """An iterative solve hit its iteration cap above the requested residual."""

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


class NonconvergenceError(RuntimeError):
    """Restart loop exhausted its budget; carries the last certified gap."""

    def __init__(self, message, certified_gap):
        super().__init__(message)
        self.certified_gap = certified_gap


class WorkerFailure(RuntimeError):
    """A simulated worker task raised; the round is aborted."""

    def __init__(self, worker_id, cause):
        super().__init__(f"worker {worker_id} failed: {cause}")
        self.worker_id = worker_id
        self.cause = cause
