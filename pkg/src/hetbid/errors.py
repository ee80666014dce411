"""Exception types shared across the package."""


class HetbidError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(HetbidError, ValueError):
    """A numeric argument lies outside the domain of the model."""


class NoDemandError(HetbidError):
    """A station has no active, covered users to split its bandwidth over."""


class InfeasibleError(HetbidError):
    """The minimum-rate constraint cannot be met with finite bandwidth."""


class DegenerateDataError(HetbidError):
    """Training data contains a single class."""


class InvalidDataError(HetbidError, ValueError):
    """Training data contains non-finite features or malformed labels."""


class ConfigError(HetbidError):
    """A configuration file is missing, unreadable or violates its schema."""
