"""Exception types shared across the solver."""


class ConfigurationError(ValueError):
    """Invalid scene / grid / run configuration."""


class OutOfDomainError(RuntimeError):
    """A particle (or evaluation point) left the background domain."""


class NumericalFatalError(RuntimeError):
    """Unrecoverable numeric state: inverted particle, non-finite nodal
    value, or a non-converging local solve."""
