"""Exception hierarchy shared across the solver.

The CLI maps these onto exit statuses: configuration problems exit with 2,
numerical failures with 3 and validation failures with 4.
"""


class WGFError(Exception):
    pass


class ConfigError(WGFError):
    """Invalid configuration or geometry request."""


class GeometryError(ConfigError):
    """Geometry that violates the layered-medium assumptions."""


class NumericsError(WGFError):
    """A numerical procedure failed or left its accuracy envelope."""


class SingularCoefficientError(NumericsError):
    """Degenerate interface coefficient denominator."""


class ResonanceError(NumericsError):
    """Vanishing multiple-reflection denominator in the planar recursion."""


class ValidationFailure(WGFError):
    """A validator suite reported failing checks."""
