"""Exception types shared across the package."""


class DprelabError(Exception):
    """Base class for all package errors."""


class DomainError(DprelabError, ValueError):
    """An argument lies outside the domain of the operation."""


class ParameterError(DprelabError, ValueError):
    """A distribution or model parameterization is not admissible."""


class CapabilityError(DprelabError, RuntimeError):
    """The request exceeds what an exact mode can compute."""


class EstimationError(DprelabError, RuntimeError):
    """A numerical estimate did not reach its requested accuracy.

    The achieved tolerance is kept on ``achieved`` so callers can decide
    whether to accept the value anyway.
    """

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class ConfigError(DprelabError, ValueError):
    """An experiment configuration is invalid.

    ``field`` names the offending configuration entry.
    """

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field
