"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid run configuration (bad key, bad value, unknown section)."""

    def __init__(self, message, line=None, key=None):
        self.line = line
        self.key = key
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class NumericalGuardError(RuntimeError):
    """A numerical guard tripped (aliasing, boundary mass, divergence)."""

    def __init__(self, message, time=None):
        self.time = time
        if time is not None:
            message = f"{message} (t = {time:.6g})"
        super().__init__(message)


class DivergenceError(NumericalGuardError):
    """A classical trajectory left the escape radius."""


class BoundaryMassError(NumericalGuardError):
    """Wave function mass reached the edge of the position grid."""


class AliasingError(NumericalGuardError):
    """Wave function mass reached the edge of the momentum grid."""
