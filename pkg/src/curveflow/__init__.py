"""Numerical toolkit for modulated singular integrals along curved paths."""

__version__ = "0.1.0"

from .errors import CoverageError, CurveflowError, GeometryError, HypothesisError

__all__ = [
    "CurveflowError",
    "CoverageError",
    "GeometryError",
    "HypothesisError",
    "__version__",
]
