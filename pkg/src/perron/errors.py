"""Exception hierarchy shared by every module."""


class PerronError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(PerronError, ValueError):
    """A parameter is missing or outside its admissible range."""


class ContractError(PerronError, ValueError):
    """Two objects that must agree (grids, partitions) do not."""


class DomainError(PerronError, ValueError):
    """A point lies outside the domain of a map or a function."""


class DegenerateDensityError(PerronError, ValueError):
    """A density has nonpositive mass and cannot be normalized."""


class OneSidedDerivativeError(DomainError):
    """Derivative requested exactly at a declared discontinuity."""


class UnsupportedMapError(PerronError, TypeError):
    """The map does not support the requested operation."""


class ExtrapolationError(PerronError, ValueError):
    """Interpolation point falls outside a non-periodic grid hull."""


class KernelWidthError(ParameterError):
    """Noise window is too wide for a non-periodic domain."""


class NumericError(PerronError, ArithmeticError):
    """An iterative numerical method failed.

    ``value`` carries the offending input or the last residual.
    """

    def __init__(self, message, value=None):
        super().__init__(message)
        self.value = value


class NonConvergenceError(NumericError):
    """An eigensolver ran out of iterations."""


class GrazingOrbitError(NumericError):
    """A billiard ray is (numerically) tangent to the boundary."""


class InvariantViolationError(PerronError, RuntimeError):
    """A simulated trajectory left the domain it must stay in."""


class InsufficientDataError(PerronError, ValueError):
    """Too few usable points for a fit."""


class DegenerateSeriesError(PerronError, ValueError):
    """A time series has zero variance."""
