"""Exception hierarchy shared across the package."""


class PredconsError(Exception):
    """Base class for all package errors."""


class InvalidInputError(PredconsError, ValueError):
    """An argument violates a documented precondition."""


class RatioPreconditionError(InvalidInputError):
    """The confidence-weighting inequality was given vectors whose bad-node share is not smaller inside."""


class ParameterRangeError(InvalidInputError):
    """A scalar parameter is outside its admissible range."""


class ConvergenceError(PredconsError):
    """An iterative routine did not converge.

    The last iterate and its residual are kept so callers can inspect how close it got.
    """

    def __init__(self, message, last_iterate=None, residual=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual


class NumericalError(PredconsError, ArithmeticError):
    """Non-finite values or an unsolvable linear system."""

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class StateError(PredconsError, RuntimeError):
    """An operation was called in a state that does not support it."""


class GenerationError(PredconsError):
    """Rejection sampling exhausted its attempt budget."""


class AgentError(PredconsError):
    """Wraps a failure inside one agent's computation."""

    def __init__(self, agent, cause):
        super().__init__(f"agent {agent}: {cause}")
        self.agent = agent
        self.cause = cause
