"""Exception hierarchy shared by every module of the package."""


class DpfError(Exception):
    """Base class for all errors raised by :mod:`dpfield`."""


class DomainError(DpfError, ValueError):
    """An argument lies outside the mathematical domain of a function."""


class CapacityError(DpfError, ValueError):
    """A size or depth parameter exceeds a documented hard cap."""


class ResolutionError(DpfError, ValueError):
    """A requested quadrature resolution is below the oscillation floor."""


class SpectrumError(DpfError, ArithmeticError):
    """An operator spectrum leaves [0, 1] by more than the clipping tolerance."""


class ConfigError(DpfError, ValueError):
    """An experiment or command configuration is inconsistent."""
