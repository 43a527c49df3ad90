"""Exception hierarchy shared by every module of the package."""


class MarketMakingError(Exception):
    """Base class for all errors raised by mmquote."""


class ContractError(MarketMakingError, ValueError):
    """An argument violates a documented precondition."""


class DomainError(ContractError):
    """A state (time, inventory) lies outside the solved grid."""


class IntensityEvaluationError(MarketMakingError):
    """A user-supplied intensity returned a non-finite value."""

    def __init__(self, delta, message=None):
        self.delta = float(delta)
        super().__init__(message or f"non-finite intensity evaluation at delta={self.delta!r}")


class BracketingError(MarketMakingError):
    """No root bracket for the optimal offset could be found."""


class CurvatureError(MarketMakingError):
    """H''(0) is not positive, so the closed-form approximations are undefined."""


class StepSizeError(MarketMakingError):
    """Newton iteration failed inside an implicit time step."""


class UnsupportedModelError(MarketMakingError):
    """The requested computation is not available for this intensity model."""


class GridSizeError(MarketMakingError):
    """The tensor inventory grid exceeds the configured node cap."""


class IdentifiabilityError(MarketMakingError):
    """Calibration data cannot identify the intensity parameters."""


class ConfigError(MarketMakingError):
    """A run configuration failed schema or semantic validation."""

    def __init__(self, message, path=()):
        self.path = tuple(path)
        where = "/".join(str(p) for p in self.path) or "<root>"
        super().__init__(f"{where}: {message}")
