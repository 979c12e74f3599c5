"""Windowed-Green-function boundary integral solver for two-dimensional
multilayer acoustic transmission scattering."""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    ConfigError,
    GeometryError,
    NumericsError,
    ResonanceError,
    SingularCoefficientError,
    ValidationFailure,
    WGFError,
)
from .kernels import WindowParams, window_eta, window_wA  # noqa: F401
from .medium import Incidence, LayerStack, planar_coefficients  # noqa: F401
