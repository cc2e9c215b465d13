"""Exception types and process exit codes shared across the package."""

EXIT_OK = 0
EXIT_SOLVER = 2
EXIT_VERIFY = 3
EXIT_USAGE = 64
EXIT_DATA = 65


class PchoquardError(Exception):
    """Base class for errors raised by this package."""


class SolverFailure(PchoquardError):
    """A solver could not produce a result (bracketing, underflow, divergence)."""

    def __init__(self, message, last_state=None):
        super().__init__(message)
        self.last_state = last_state


class NonConvergence(SolverFailure):
    """Iteration budget exhausted before the stopping rule was met."""

    def __init__(self, message, last_iterate=None, grad_norm=None, partial=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.grad_norm = grad_norm
        # completed results when some runs of a batch succeeded before the failure
        self.partial = partial if partial is not None else []


class VerificationFailure(PchoquardError):
    """A computed object failed a verification check it was required to pass."""


class DataFormatError(PchoquardError):
    """An input file does not conform to the expected format."""


class UndefinedFunctional(PchoquardError):
    """A functional value is undefined for the given input (zero profile, D = 0)."""
