"""Exception hierarchy shared across the package."""


class DebtRankError(Exception):
    """Base class for all package errors."""


class DataError(DebtRankError, ValueError):
    """Invalid or inconsistent balance-sheet / network input."""


class ConfigError(DebtRankError, ValueError):
    """Invalid run configuration."""


class InfeasibleError(DataError):
    """A reconstruction target that no network can satisfy."""
