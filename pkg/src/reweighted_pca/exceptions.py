"""Exception hierarchy.

Every error raised on purpose by this package derives from
:class:`NGCAError`, which is itself a :class:`ValueError` so callers used to
scikit-learn's conventions can keep catching ``ValueError``.
"""


class NGCAError(ValueError):
    """Base class for all package errors."""


class InvalidDimensionError(NGCAError):
    pass


class ConfigurationError(NGCAError):
    pass


class ShapeError(NGCAError):
    pass


class PairingError(NGCAError):
    pass


class SingularCovarianceError(NGCAError):
    def __init__(self, eigenvalue, message=None):
        self.eigenvalue = float(eigenvalue)
        super().__init__(
            message
            or f"sample covariance is singular: eigenvalue {self.eigenvalue:.3e} "
            "is not positive; pass eigen_floor > 0 to clamp it"
        )


class DomainError(NGCAError):
    """A scaling parameter lies outside the region where a quantity exists."""


class DegenerateWeightsError(NGCAError):
    def __init__(self, message, alpha=None):
        self.alpha = alpha
        super().__init__(message)


class InvalidOrderError(NGCAError):
    pass


class InputFormatError(NGCAError):
    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)
