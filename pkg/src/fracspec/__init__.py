"""Spectral solver for time-fractional diffusion with non-homogeneous data."""

from ._accel import backend
from .mittag_leffler import MLParams, ml, ml_eval, ml_kernel, ml_primitive, ml_time_derivative
from .spectral_basis import Coefficients, Interval, Rectangle, SpectralBasis, build_basis

__version__ = "0.1.0"

__all__ = [
    "Coefficients",
    "Interval",
    "MLParams",
    "Rectangle",
    "SpectralBasis",
    "backend",
    "build_basis",
    "ml",
    "ml_eval",
    "ml_kernel",
    "ml_primitive",
    "ml_time_derivative",
]
