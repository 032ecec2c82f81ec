"""Exception hierarchy shared by every module of the package."""


class CVDistillError(Exception):
    """Base class for all package errors."""


class InvalidParameter(CVDistillError, ValueError):
    """A parameter violates the documented precondition of an operation."""


class NumericalError(CVDistillError, ArithmeticError):
    """A numerical procedure produced an unusable result."""


class ZeroSuccessProbability(NumericalError):
    """The heralding event has (numerically) zero probability."""

    def __init__(self, p_succ=0.0):
        super().__init__(f"zero success probability (p_succ={p_succ:.3e})")
        self.p_succ = p_succ


class TruncationError(NumericalError):
    """A Fock-space truncation leaks more weight than tolerated."""


class ConvergenceError(NumericalError):
    """An iterative procedure hit its cap without meeting its tolerance."""

    def __init__(self, message, last_values=()):
        super().__init__(message)
        self.last_values = tuple(last_values)


class NoTransitionError(CVDistillError):
    """The requested threshold does not lie inside the searched range."""
