"""Shared exception types."""


class AggrmlError(Exception):
    """Base class for all library errors."""


class DataFormatError(AggrmlError):
    """Malformed or invariant-violating input data."""


class IndexFormatError(AggrmlError):
    """Corrupted or invalid bucket-index file."""


class ConfigError(AggrmlError):
    """Invalid run configuration."""
