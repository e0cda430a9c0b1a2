"""Exception hierarchy shared across the package."""


class LoewnerError(Exception):
    """Base class for all package errors."""


class DomainError(LoewnerError, ValueError):
    """An evaluation point lies outside the function's domain."""


class ParameterError(LoewnerError, ValueError):
    """Invalid construction or transform parameters."""


class PreconditionError(LoewnerError):
    """A hypothesis required by a check is violated by the inputs."""


class InsufficientDataError(LoewnerError):
    """Not enough usable samples to carry out a measurement."""


class CoverageError(LoewnerError):
    """A sampled path does not cover the requested range."""


class IntegrationError(LoewnerError):
    """Numerical integration failed.

    `step_index` locates the offending step when known.
    """

    def __init__(self, message, step_index=None):
        super().__init__(message)
        self.step_index = step_index


class AmbiguousSwallowError(IntegrationError):
    """Step size underflowed before a swallow could be declared.

    Carries the last integrator state for diagnosis.
    """

    def __init__(self, message, last_t=None, last_z=None):
        super().__init__(message)
        self.last_t = last_t
        self.last_z = last_z


class AnalyticDerivativeUnavailable(LoewnerError):
    """The family has no closed-form derivative in the requested regime."""
