"""Exception types raised across the package."""


class AutoBCTError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(AutoBCTError, ValueError):
    """An argument violates a documented precondition."""


class InvalidObservationError(AutoBCTError, ValueError):
    """A score or cost observation is unusable (non-finite, malformed)."""


class NumericalDegeneracyError(AutoBCTError, ArithmeticError):
    """A computed quantity left its valid numerical range beyond tolerance."""


class InsufficientDataError(AutoBCTError, ValueError):
    """Too few samples for the requested regression kind."""


class IncompatibleMapError(AutoBCTError, RuntimeError):
    """A value map does not match the problem it is being used for."""


class BudgetExceededError(AutoBCTError, RuntimeError):
    """A configured compute budget (recursion depth) would be exceeded."""


class TrainerFailureError(AutoBCTError, RuntimeError):
    """An external trainer failed after the configured retries."""


class ProtocolError(AutoBCTError, RuntimeError):
    """The trainer wire protocol was violated."""


class StartupFailureError(AutoBCTError, RuntimeError):
    """A trainer subprocess failed to come up."""


class ConfigError(AutoBCTError, ValueError):
    """A configuration document is invalid."""
