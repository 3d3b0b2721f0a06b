"""Exception hierarchy shared across the package."""


class CopyFaithError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(CopyFaithError):
    """Invalid or unloadable pipeline configuration."""
