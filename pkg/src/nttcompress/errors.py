"""Exception hierarchy shared by all modules."""


class NTTError(Exception):
    """Base class for errors raised by nttcompress."""


class InvalidArgumentError(NTTError, ValueError):
    pass


class DegenerateInputError(NTTError, ValueError):
    """Input is well-formed but degenerate (zero tensor, zero norm, ...)."""


class DomainError(NTTError, ValueError):
    """A function was evaluated outside its domain (e.g. log of a non-positive entry)."""


class NumericalBreakdownError(NTTError, ArithmeticError):
    """A numerical routine produced non-finite values or lost definiteness."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class StalledLineSearchError(NumericalBreakdownError):
    pass


class FitAborted(NTTError):
    """A fit stopped on a per-node error; carries the trace recorded so far."""

    def __init__(self, message, trace=None, node=None):
        super().__init__(message)
        self.trace = trace
        self.node = node


class StaleCacheError(NTTError, RuntimeError):
    """An environment was used after one of the cores it depends on changed."""
