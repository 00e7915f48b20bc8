"""Exception types shared across the package."""


class InputError(ValueError):
    """Bad data passed to an operation (shape mismatch, nonfinite values, ...)."""


class ConfigError(ValueError):
    """Inconsistent or schema-invalid configuration."""


class NumericalError(RuntimeError):
    """A numerical guarantee was violated (solver blow-up, nesting violation, ...)."""
