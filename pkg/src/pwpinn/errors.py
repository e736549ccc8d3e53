"""Exception types. The CLI maps these onto exit codes (config -> 1, numeric -> 2)."""


class PwpinnError(Exception):
    pass


class ConfigurationError(PwpinnError):
    """Bad shapes, incompatible grids, malformed config files."""


class DomainError(PwpinnError):
    """Point or time outside the problem domain."""


class UsageError(PwpinnError):
    """API misuse: wrong tape, empty point sets, unsupported requests."""


class UnsupportedOrderError(UsageError):
    """Derivative order above what the engine propagates."""


class DivergenceError(PwpinnError):
    """Training loss went non-finite. Carries the last good parameter state."""

    def __init__(self, message, checkpoint=None):
        super().__init__(message)
        self.checkpoint = checkpoint
