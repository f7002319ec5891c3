"""Mean-field cavity observables: overlap, photon number, effective potential."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Grid, ModelParams, NoDoubleWellError, OrderParameter
from .kernels import weighted_density


@dataclass(frozen=True)
class CavityState:
    n_ss: float
    y_overlap: float


def mode_profile(grid: Grid, p: ModelParams) -> np.ndarray:
    """Dimensionless mode shape e^{-(x - offset)^2 / delta_x^2} (U(x) / U0)."""
    return np.exp(-((grid.x - p.barrier_offset) ** 2) / p.delta_x**2)


def overlap_y(psi: OrderParameter, p: ModelParams) -> float:
    """Y = integral |psi|^2 U0 exp(-(x - offset)^2 / dx^2), trapezoid on the periodic grid."""
    psi.require_normalized()
    return p.u0 * weighted_density(psi.values, mode_profile(psi.grid, p)) * psi.grid.dx


def steady_state_photon_number(y: float, p: ModelParams) -> float:
    return p.eta**2 / (p.kappa**2 + (p.delta_c - p.n_atoms * y) ** 2)


def cavity_state(psi: OrderParameter, p: ModelParams) -> CavityState:
    y = overlap_y(psi, p)
    return CavityState(steady_state_photon_number(y, p), y)


def effective_potential(grid: Grid, n_ss: float, p: ModelParams) -> np.ndarray:
    if n_ss < 0:
        raise ValueError("n_ss must be >= 0")
    return 0.5 * grid.x**2 + n_ss * p.u0 * mode_profile(grid, p)


def well_minimum_position(n_ss: float, p: ModelParams) -> float:
    """Distance x0 of the double-well minima from the barrier centre.

    Raises :class:`NoDoubleWellError` when 2 U0 n_ss / delta_x^2 <= 1.
    """
    arg = 2 * p.u0 * n_ss / p.delta_x**2
    if not arg > 1:
        raise NoDoubleWellError(
            f"no double well: 2 U0 n_ss / delta_x^2 = {arg:.6g} <= 1")
    return p.delta_x * math.sqrt(math.log(arg))


def gaussian_overlap(p: ModelParams, sigma: float = 1.0) -> float:
    """Y for a centred Gaussian density of width sigma: U0 / sqrt(1 + sigma^2/dx^2)."""
    return p.u0 / math.sqrt(1 + sigma**2 / p.delta_x**2)


def critical_pump_estimate(p: ModelParams, sigma_guess: float = 1.0) -> float:
    """Pump at which the Gaussian-state barrier n_ss U0 reaches one trap quantum."""
    if sigma_guess <= 0:
        raise ValueError("sigma_guess must be > 0")
    y = gaussian_overlap(p, sigma_guess)
    return math.sqrt((p.kappa**2 + (p.delta_c - p.n_atoms * y) ** 2) / p.u0)


def resonance_coupling(p: ModelParams, sigma: float = 1.0) -> float:
    """U0 that puts a Gaussian state of width sigma on cavity resonance (delta_c = N Y)."""
    return p.delta_c / p.n_atoms * math.sqrt(1 + sigma**2 / p.delta_x**2)
