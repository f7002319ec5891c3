"""Ultracold atoms in a double well formed by a driven cavity field."""
__version__ = "0.1.0"

from .core import (ConvergenceError, Grid, ModelParams, NoDoubleWellError, NumericalError,
                   OrderParameter, UnitSystem, from_oscillator_units, gaussian, make_grid,
                   normalize, to_oscillator_units)

__all__ = [
    "ConvergenceError", "Grid", "ModelParams", "NoDoubleWellError", "NumericalError",
    "OrderParameter", "UnitSystem", "from_oscillator_units", "gaussian", "make_grid",
    "normalize", "to_oscillator_units", "__version__",
]
