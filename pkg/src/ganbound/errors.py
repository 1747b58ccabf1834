"""Exception types shared across the package.

The CLI maps these onto its exit codes: configuration problems exit 2,
numerical and domain failures exit 3, and IO failures exit 4.
"""


class GanBoundError(Exception):
    """Base class for all package errors."""


class ShapeError(GanBoundError, ValueError):
    """Array or network dimensions do not chain."""


class DomainError(GanBoundError, ValueError):
    """A value falls outside the domain of a measuring function, or a
    measuring function cannot cover an interval a bound requires."""


class ConstraintError(GanBoundError, ValueError):
    """A weight assignment leaves its Frobenius-norm ball."""


class OracleCapError(GanBoundError, ValueError):
    """Exhaustive grid search requested above the parameter cap."""


class NumericalError(GanBoundError, ArithmeticError):
    """An objective or gap evaluated to a non-finite number."""


class ConfigError(GanBoundError, ValueError):
    """A configuration file is missing fields or violates a constraint."""


class ReportIOError(GanBoundError, OSError):
    """Writing or reading a result file failed."""
