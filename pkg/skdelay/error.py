from typing import Iterable


class SkdelayError(Exception):
    """Base class of every error raised by skdelay."""


class ArgumentError(SkdelayError, ValueError):
    """An argument is outside of the range the operation is defined on."""


class DimensionError(ArgumentError):
    """Grids, bases or coefficient vectors do not have matching shapes."""


class GridAlignmentError(ArgumentError):
    """A time point or segment grid does not sit on the solver grid."""


class SingularDriftError(ArgumentError):
    """An un-mollified drift was handed to a scheme that needs Lipschitz
    coefficients."""


class UnboundedPayoffError(ArgumentError):
    """A payoff without a finite bound was passed to a Girsanov check."""


class ConfigError(SkdelayError, ValueError):
    """The experiment configuration contains unknown or invalid entries."""


class NumericalError(SkdelayError, ArithmeticError):
    """A numerical routine could not produce a trustworthy result."""


class AssumptionError(SkdelayError):
    """
    Raised when an experiment needs an admissible configuration
    and one or more of the standing assumptions fail.
    """

    def __init__(self, failures: Iterable[str]):
        self.failures = list(failures)
        msg = "Configuration is not admissible, failing assumptions: "
        msg += ", ".join(self.failures)
        super().__init__(msg)
