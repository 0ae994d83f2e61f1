"""Exception types shared across the package."""


class DomainError(ValueError):
    """An object was evaluated or shifted outside its admissible domain."""


class NoDichotomyError(RuntimeError):
    """No exponential-dichotomy splitting was detected at the given horizon."""


class PreconditionError(RuntimeError):
    """An operation's stated precondition (e.g. asymptotic stability) is not met."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ConfigError(ValueError):
    """Malformed or incomplete configuration document."""
