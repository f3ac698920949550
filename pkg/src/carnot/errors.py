"""Exception types raised by the toolkit.

All of them derive from :class:`ValueError` so callers that only care about
"bad input" can catch that.
"""


class CarnotError(ValueError):
    """Base class for toolkit errors."""


class InvalidInputError(CarnotError):
    pass


class UnsupportedStepError(CarnotError):
    pass


class UnsupportedGroupError(CarnotError):
    pass


class NoLastLayerError(CarnotError):
    pass


class SingularConfigurationError(CarnotError):
    """A configuration or matrix has zero minimal height."""


class RankDeficiencyError(CarnotError):
    pass


class UnsupportedModeError(CarnotError):
    pass


class NotQuasiGeodesicError(CarnotError):
    """Samples violate the (1, C) quasi-geodesic bounds.

    ``witness`` holds the offending pair of sample indices.
    """

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness
