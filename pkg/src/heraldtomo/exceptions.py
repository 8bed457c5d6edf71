"""Exception hierarchy shared by the package and mapped to CLI exit codes."""


class HeraldTomoError(Exception):
    """Base class for all package errors."""

    code = "error"


class ConfigurationError(HeraldTomoError, ValueError):
    """Invalid physical or run configuration."""

    code = "config"


class DimensionError(HeraldTomoError, ValueError):
    """Operands built under different Fock cutoffs."""

    code = "dimension"


class DataError(HeraldTomoError, ValueError):
    """Malformed, empty or unusable measurement data."""

    code = "data"


class NumericalError(HeraldTomoError, ArithmeticError):
    """A computation could not be carried out to the required accuracy."""

    code = "numerical"


class HeraldImpossibleError(NumericalError):
    code = "herald"


class PhaseInsensitiveError(DataError):
    """Phase assignment requested for data with no phase dependence."""

    code = "phase"
