"""Exception types shared across the package."""


class AssouadError(Exception):
    """Base class for all package errors."""


class InvalidSpecError(AssouadError, ValueError):
    """Function-family parameters outside their admissible range."""


class EmptyIntervalError(AssouadError, ValueError):
    """An interval contains no grid point of the sampled function."""


class ResolutionError(AssouadError, ValueError):
    """Grid step too coarse for the requested covering scale."""


class DisjointError(AssouadError, ValueError):
    """A square does not meet the sampled graph."""


class NotMonotoneError(AssouadError, ValueError):
    pass


class GridMismatchError(AssouadError, ValueError):
    pass


class NoMaximumError(AssouadError, ValueError):
    """No strict local maximum is available where one is required."""


class DepthError(AssouadError, ValueError):
    pass


class ParameterError(AssouadError, ValueError):
    """Parameters violate a stated admissibility condition."""


class InfeasibleError(AssouadError, ValueError):
    """No admissible construction exists for the given parameters."""


class AuditFailure(AssouadError):
    """A packing audit found violations; ``offending`` lists them."""

    def __init__(self, message, offending=()):
        super().__init__(message)
        self.offending = list(offending)
