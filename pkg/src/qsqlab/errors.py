"""Exception types raised across qsqlab."""


class QSQLabError(Exception):
    """Base class for all qsqlab errors."""


class ConfigurationError(QSQLabError, ValueError):
    """Parameters are individually valid but cannot be used together."""


class ResourceLimitError(QSQLabError):
    """A dense representation would exceed the configured size cap."""


class InconsistentPriorError(QSQLabError):
    """An oracle response is incompatible with the stated prior on the noise."""
