"""Exception types shared across the toolkit."""


class GridMismatchError(ValueError):
    """Operands live on different grids or incompatible dimensions."""


class DegreeError(ValueError):
    """Form degree out of range for the requested operation."""


class MetricError(ValueError):
    """Metric fails symmetry/positivity at some node."""


class DegeneracyError(ValueError):
    """A matrix or form that must be non-degenerate is singular."""


class ConvexityError(ValueError):
    """Discrete Hessian fails positive definiteness."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class DomainError(ValueError):
    """Requested evaluation point leaves the admissible domain."""


class ConvergenceError(RuntimeError):
    """Iterative solver failed to reach its tolerance."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history) if history is not None else []


class InputError(ValueError):
    """Malformed configuration or input file."""
