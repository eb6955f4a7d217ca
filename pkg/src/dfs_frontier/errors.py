"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A run configuration is invalid (bad flag combination, out-of-range
    parameter, malformed report file). CLI maps this to exit code 2."""


class InvariantViolation(RuntimeError):
    """An internal consistency check failed. This always indicates a bug in
    an engine or a corrupted input, never a statistical fluctuation. CLI maps
    this to exit code 3 and dumps `context`."""

    def __init__(self, message, context=None):
        super().__init__(message)
        self.context = dict(context or {})


class StreamExhausted(RuntimeError):
    """A finite answer stream ran out mid-run. Real Bernoulli streams are
    unbounded, so this signals a harness bug in the caller."""
