"""Exception hierarchy shared by the library and the command line."""


class DcovIcaError(Exception):
    """Base class for every error raised by this package."""


class InputError(DcovIcaError, ValueError):
    """Malformed input: wrong shape, non-numeric cells, bad arguments."""


class InsufficientDataError(InputError):
    """Too few observations for the requested computation."""


class DegenerateDataError(DcovIcaError, ValueError):
    """The data are numerically degenerate (constant columns, zero scale)."""


class SingularCovarianceError(DegenerateDataError):
    """Sample covariance is rank deficient.

    Attributes
    ----------
    index : int
        Position (in descending order) of the first eigenvalue that fell
        below the relative threshold.
    eigenvalue : float
        The offending eigenvalue.
    """

    def __init__(self, index: int, eigenvalue: float, threshold: float):
        self.index = index
        self.eigenvalue = eigenvalue
        self.threshold = threshold
        super().__init__(
            f"singular sample covariance: eigenvalue #{index} = {eigenvalue:.3e} "
            f"is below {threshold:.3e}"
        )


class SingularMatrixError(DegenerateDataError):
    """A matrix that must be invertible is singular or badly conditioned."""


class NotOrthogonalError(InputError):
    """A matrix expected to be a rotation is not orthogonal."""


class ReflectionError(NotOrthogonalError):
    """An orthogonal matrix has determinant -1 where +1 is required."""


class ConvergenceWarning(UserWarning):
    """The local optimizer stopped before meeting its tolerances."""
