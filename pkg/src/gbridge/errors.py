"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class GBRidgeError(Exception):
    exit_code = 1


class ConfigError(GBRidgeError, ValueError):
    """Malformed configuration or command-line input."""

    exit_code = 1


class DataError(GBRidgeError, ValueError):
    """Input data with the wrong shape or content."""

    exit_code = 2


class RankDeficientError(DataError):
    """Design matrix does not have full column rank."""


class DomainError(GBRidgeError, ValueError):
    """Parameter outside the region where a result is defined."""

    exit_code = 3


class RegimeError(DomainError):
    """Construction requested for eigenvalue structure it does not cover."""


class OrderingError(DomainError):
    """Shrinkage factors violate the ordering a bound assumes."""


class QuadratureError(GBRidgeError, RuntimeError):
    exit_code = 3
