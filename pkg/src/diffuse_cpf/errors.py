"""Exception hierarchy shared by every module of the package."""


class DiffuseCPFError(Exception):
    """Base class for all errors raised by diffuse_cpf."""


class AllWeightsZero(DiffuseCPFError):
    """Every particle weight in a row is zero (total degeneracy)."""


class ImproperInitError(DiffuseCPFError):
    """A normalised draw was requested from an improper initial measure."""


class StartOutsideDomain(DiffuseCPFError):
    """A Metropolis kernel was started at a point where M1 vanishes."""


class SelectorMismatch(DiffuseCPFError):
    """Adaptation data came from a path selector the rule cannot use."""


class NonFiniteTarget(DiffuseCPFError):
    """A log target density evaluated to NaN."""


class ChainTooShort(DiffuseCPFError):
    """Too few samples for a meaningful autocorrelation estimate."""


class InvalidCounts(DiffuseCPFError):
    """Compartment counts became negative or inconsistent."""


class ConfigError(DiffuseCPFError):
    """An experiment configuration failed validation.

    Attributes:
        field: Name of the offending configuration field.
    """

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
