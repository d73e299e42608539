"""Exception types raised by ammzones."""


class AmmZonesError(Exception):
    """Base class for all library errors."""


class DomainError(AmmZonesError, ValueError):
    """An input lies outside the mathematical domain of an operation."""


class NoCrossingError(AmmZonesError):
    """LP profit never changes sign inside the searched ratio range."""

    def __init__(self, message, side=None, search_limit=None):
        super().__init__(message)
        self.side = side
        self.search_limit = search_limit


class InfeasibleTargetError(AmmZonesError):
    """No fee in the admissible range meets the requested IL probability."""

    def __init__(self, message, achieved=None, max_fee=None):
        super().__init__(message)
        self.achieved = achieved
        self.max_fee = max_fee


class UnsupportedConfigurationError(AmmZonesError):
    """The requested combination of parameters is not covered by the model."""
