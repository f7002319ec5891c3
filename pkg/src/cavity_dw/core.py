"""Parameter sets, unit conversion, grids and the wavefunction container.

Everything downstream works in harmonic-oscillator units: hbar = m = omega = 1,
lengths in a_ho = sqrt(hbar / m omega), times in 1/omega, energies in hbar omega.
Rates quoted "in units of kappa" are converted once, here.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy import constants

from .kernels import norm_sq

NORM_TOL = 1e-10


class NoDoubleWellError(ValueError):
    """The effective potential has a single minimum at the barrier centre."""


class NumericalError(RuntimeError):
    """NaN, overflow or boundary leakage during propagation.

    ``partial`` carries whatever was recorded before the failure, if anything.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class ConvergenceError(RuntimeError):
    """An iterative solver hit its iteration cap; ``last`` holds the final iterate."""

    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters in oscillator units.

    ``n_atoms`` is real so mean-field code can scale it continuously; the
    two-mode Fock operations take integer atom numbers explicitly.
    """

    kappa: float
    delta_c: float
    u0: float
    eta: float
    delta_x: float
    g_coll: float = 0.0
    n_atoms: float = 1e4
    barrier_offset: float = 0.0

    def __post_init__(self):
        for name in ("kappa", "delta_c", "u0", "eta", "delta_x", "g_coll",
                     "n_atoms", "barrier_offset"):
            val = getattr(self, name)
            if not math.isfinite(val):
                raise ValueError(f"{name} must be finite, got {val!r}")
        if self.kappa <= 0:
            raise ValueError(f"kappa must be > 0, got {self.kappa}")
        if self.eta < 0:
            raise ValueError(f"eta must be >= 0, got {self.eta}")
        if self.delta_x <= 0:
            raise ValueError(f"delta_x must be > 0, got {self.delta_x}")
        if self.n_atoms <= 0:
            raise ValueError(f"n_atoms must be > 0, got {self.n_atoms}")

    @classmethod
    def from_kappa_units(cls, omega_ratio: float, *, delta_c: float, u0: float,
                         eta: float, delta_x: float, g_coll: float = 0.0,
                         n_atoms: float = 1e4, barrier_offset: float = 0.0) -> "ModelParams":
        """Rates given as multiples of kappa, with kappa = omega_ratio * omega."""
        if omega_ratio <= 0:
            raise ValueError("omega_ratio must be > 0")
        return cls(kappa=omega_ratio, delta_c=delta_c * omega_ratio,
                   u0=u0 * omega_ratio, eta=eta * omega_ratio, delta_x=delta_x,
                   g_coll=g_coll, n_atoms=n_atoms, barrier_offset=barrier_offset)

    def replace(self, **changes) -> "ModelParams":
        return dataclasses.replace(self, **changes)

    def scaled(self, lam: float) -> "ModelParams":
        """Thermodynamic rescaling (N, U0, eta) -> (lam N, U0/lam, sqrt(lam) eta)."""
        return self.replace(n_atoms=self.n_atoms * lam, u0=self.u0 / lam,
                            eta=self.eta * math.sqrt(lam))

    @property
    def max_photons(self) -> float:
        return self.eta**2 / self.kappa**2


# -- units -------------------------------------------------------------------

@dataclass(frozen=True)
class UnitSystem:
    """SI anchor for oscillator units: kappa = 2 pi kappa_hz, omega = kappa / omega_ratio."""

    kappa_hz: float
    omega_ratio: float
    mass_u: float = 87.0

    def __post_init__(self):
        if not (self.kappa_hz > 0 and self.omega_ratio > 0 and self.mass_u > 0):
            raise ValueError("kappa_hz, omega_ratio and mass_u must all be > 0")

    @property
    def omega(self) -> float:
        """Trap angular frequency in rad/s."""
        return 2 * math.pi * self.kappa_hz / self.omega_ratio

    @property
    def time_unit(self) -> float:
        """Seconds per dimensionless time unit."""
        return 1.0 / self.omega

    @property
    def length_unit(self) -> float:
        """a_ho in metres."""
        return math.sqrt(constants.hbar / (self.mass_u * constants.atomic_mass * self.omega))

    def seconds(self, t: float) -> float:
        return t * self.time_unit

    def metres(self, length: float) -> float:
        return length * self.length_unit

    def to_length(self, metres: float) -> float:
        return metres / self.length_unit


_RATE_KEYS = ("delta_c", "u0", "eta")


def to_oscillator_units(raw: Mapping) -> ModelParams:
    """Convert experiment-style inputs into a :class:`ModelParams`.

    ``raw`` holds ``kappa_hz`` (kappa / 2 pi in Hz), ``omega_ratio`` (kappa / omega),
    the rates ``delta_c``, ``u0``, ``eta`` in units of kappa, and ``delta_x``
    either in a_ho or, as ``delta_x_m``, in metres (needs ``mass_u``, default 87).
    """
    units = UnitSystem(float(raw["kappa_hz"]), float(raw["omega_ratio"]),
                       float(raw.get("mass_u", 87.0)))
    if "delta_x_m" in raw:
        delta_x = units.to_length(float(raw["delta_x_m"]))
    else:
        delta_x = float(raw["delta_x"])
    return ModelParams.from_kappa_units(
        units.omega_ratio,
        delta_c=float(raw["delta_c"]), u0=float(raw["u0"]), eta=float(raw["eta"]),
        delta_x=delta_x, g_coll=float(raw.get("g_coll", 0.0)),
        n_atoms=float(raw.get("n_atoms", 1e4)),
        barrier_offset=float(raw.get("barrier_offset", 0.0)),
    )


def from_oscillator_units(p: ModelParams, kappa_hz: float, mass_u: float = 87.0) -> dict:
    """Inverse of :func:`to_oscillator_units` (rates back in units of kappa)."""
    units = UnitSystem(kappa_hz, p.kappa, mass_u)
    return {
        "kappa_hz": kappa_hz,
        "omega_ratio": p.kappa,
        "mass_u": mass_u,
        "delta_c": p.delta_c / p.kappa,
        "u0": p.u0 / p.kappa,
        "eta": p.eta / p.kappa,
        "delta_x": p.delta_x,
        "delta_x_m": units.metres(p.delta_x),
        "g_coll": p.g_coll,
        "n_atoms": p.n_atoms,
        "barrier_offset": p.barrier_offset,
    }


# -- grid --------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform periodic grid x_j = -x_max + j dx, with FFT wavenumbers k_j."""

    n_points: int
    x_max: float
    x: np.ndarray = field(init=False, repr=False)
    k: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = self.n_points
        if not isinstance(n, (int, np.integer)) or n < 256 or n & (n - 1):
            raise ValueError(f"n_points must be a power of two >= 256, got {n!r}")
        if not self.x_max >= 10:
            raise ValueError(f"x_max must be >= 10, got {self.x_max!r}")
        dx = 2 * self.x_max / n
        if dx >= 0.1:
            raise ValueError(f"grid spacing {dx} must be < 0.1")
        x = -self.x_max + np.arange(n) * dx
        k = 2 * np.pi * np.fft.fftfreq(n, d=dx)
        x.flags.writeable = False
        k.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "k", k)

    @property
    def dx(self) -> float:
        return 2 * self.x_max / self.n_points

    @property
    def length(self) -> float:
        return 2 * self.x_max

    def mirror(self, values: np.ndarray) -> np.ndarray:
        """Sample f(-x) on the grid (index j -> (N - j) mod N)."""
        return np.roll(values[::-1], 1)

    def __eq__(self, other):
        return (isinstance(other, Grid) and self.n_points == other.n_points
                and self.x_max == other.x_max)

    def __hash__(self):
        return hash((self.n_points, self.x_max))


def make_grid(n_points: int = 1024, x_max: float = 12.0) -> Grid:
    return Grid(n_points, float(x_max))


# -- order parameter ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class OrderParameter:
    """Complex wavefunction samples on a grid. The array is read-only."""

    values: np.ndarray
    grid: Grid

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.complex128)
        if vals.shape != (self.grid.n_points,):
            raise ValueError(f"values has shape {vals.shape}, grid needs ({self.grid.n_points},)")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    def norm(self) -> float:
        return norm_sq(self.values) * self.grid.dx

    def is_normalized(self, tol: float = NORM_TOL) -> bool:
        return abs(self.norm() - 1.0) < tol

    def require_normalized(self, tol: float = NORM_TOL) -> None:
        err = abs(self.norm() - 1.0)
        if not err < tol:
            raise ValueError(f"order parameter is not normalized (|norm - 1| = {err:.3e})")

    def mirrored(self) -> "OrderParameter":
        return OrderParameter(self.grid.mirror(self.values), self.grid)


def normalize(psi: OrderParameter) -> OrderParameter:
    nrm = psi.norm()
    if not nrm > 0 or not math.isfinite(nrm):
        raise ValueError("cannot normalize a wavefunction with zero or non-finite norm")
    return OrderParameter(psi.values / math.sqrt(nrm), psi.grid)


def gaussian(grid: Grid, center: float = 0.0, width: float = 1.0) -> OrderParameter:
    """Normalized e^{-(x - center)^2 / 2 width^2}."""
    if width <= 0:
        raise ValueError("width must be > 0")
    vals = np.exp(-((grid.x - center) ** 2) / (2 * width**2)).astype(np.complex128)
    return normalize(OrderParameter(vals, grid))
