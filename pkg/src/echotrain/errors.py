"""Exception types shared across the package.

Everything raised on purpose derives from EchotrainError so callers (and the
CLI) can distinguish our failures from genuine bugs.
"""


class EchotrainError(Exception):
    """Base class for all package-level errors."""


class ConfigError(EchotrainError):
    """Invalid or inconsistent configuration values."""


class DegenerateGeometryError(EchotrainError):
    """Sampled positions too close for a stable coupling matrix."""


class CalibrationError(EchotrainError):
    """Density calibration failed to bracket or converge."""


class ResourceLimitError(EchotrainError):
    """Requested problem size exceeds a configured hard limit."""


class DivergenceError(EchotrainError):
    """Iterative propagator left the unit ball; spectral bound too small."""
