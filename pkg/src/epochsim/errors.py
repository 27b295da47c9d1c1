"""Exception types shared across the engine."""


class LookaheadViolation(RuntimeError):
    """An event was scheduled closer than the model's declared lookahead."""


class CausalityError(RuntimeError):
    """The per-object non-decreasing timestamp order was violated."""


class AllocatorError(RuntimeError):
    """Bad chunk handle, exhausted reservation, or cross-object release."""


class ConfigError(ValueError):
    """Invalid engine or benchmark configuration."""
