"""Exception hierarchy shared by all ergoid modules."""


class ErgoidError(Exception):
    """Base class for every error raised by ergoid."""


class ParameterError(ErgoidError, ValueError):
    """An argument is outside the domain an operation accepts."""


class DynamicsError(ErgoidError):
    """An orbit left the open unit interval."""

    def __init__(self, step, value):
        self.step = step
        self.value = value
        super().__init__(f"state left (0, 1) at step {step}: value {value!r}")


class NumericalRankError(ErgoidError):
    """A restricted design matrix is numerically rank deficient."""


class ExperimentError(ErgoidError):
    """An identification trial could not be carried out."""


class FitError(ErgoidError):
    """A log-log scaling fit cannot be computed from the given results."""


class ConfigError(ErgoidError, ValueError):
    """Malformed or unknown configuration entries."""
