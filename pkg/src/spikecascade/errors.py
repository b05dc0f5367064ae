class ConfigError(ValueError):
    """Invalid parameters; carries the offending field name when known."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class DomainError(ValueError):
    pass


class SimulationError(RuntimeError):
    """Numerical breakdown during time stepping (NaN/inf potentials)."""

    def __init__(self, message, step=None, time=None):
        super().__init__(message)
        self.step = step
        self.time = time
