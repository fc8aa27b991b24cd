"""
Exception hierarchy shared by every stage of the toolkit.
"""


class InvisiguideError(Exception):
    """Base class. `reason` is a short machine-readable slug."""

    reason = "error"

    def __init__(self, message: str, reason: str = None):
        super().__init__(message)
        self.message = message
        if reason is not None:
            self.reason = reason

    def one_line(self) -> str:
        """Render the error as `<reason>: <message>` on a single line."""
        text = " ".join(self.message.split())
        return f"{self.reason}: {text}"


class ConfigError(InvisiguideError):
    reason = "config-error"


class GeometryError(InvisiguideError):
    reason = "geometry-error"


class SolverError(InvisiguideError):
    """Raised when a factorization or eigen-iteration cannot be trusted."""

    reason = "solver-failure"

    def __init__(self, message: str, reason: str = None, pivot: float = None):
        super().__init__(message, reason)
        self.pivot = pivot


class ConvergenceError(InvisiguideError):
    reason = "non-convergence"

    def __init__(self, message: str, reason: str = None, state=None):
        super().__init__(message, reason)
        self.state = state
