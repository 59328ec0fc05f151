"""Exception hierarchy.

Configuration problems (bad input, violated preconditions) and model failures
(solver could not produce an answer) are kept apart because the CLI maps them
to different exit codes.
"""


class DispfilterError(Exception):
    """Base class for all package errors."""


class ConfigurationError(DispfilterError, ValueError):
    """Invalid input: bad parameter, violated precondition, unparsable file."""


class DomainError(ConfigurationError):
    """Argument outside the mathematical domain of an operation."""


class PlatformNotFoundError(ConfigurationError, LookupError):
    pass


class ModelError(DispfilterError, RuntimeError):
    """The model or solver could not produce a result."""


class DegenerateDensityError(ModelError):
    pass


class SignalExtinguishedError(ModelError):
    def __init__(self, loss_db: float):
        self.loss_db = loss_db
        super().__init__(f"signal extinguished by loss ({loss_db:.6g} dB)")


class SeparationUnreachableError(ModelError):
    pass


class NonMonotoneError(ModelError):
    pass


class NotSeparatedError(ModelError):
    pass
