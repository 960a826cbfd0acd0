"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration: unknown name, bad value, inconsistent settings."""


class ShapeError(ValueError):
    """Array arguments have incompatible shapes."""


class NumericError(ValueError):
    """Non-finite values where finite ones are required."""


class StateError(RuntimeError):
    """Operation called on an object in an unusable state (e.g. empty dataset)."""


class UnsupportedOperationError(RuntimeError):
    """Operation not available for this object (e.g. Riccati gain on a nonlinear env)."""
