"""Split-step Gross-Pitaevskii propagation with an adiabatically slaved cavity field.

The cavity photon number is an explicit function of the density,
n_ss = eta^2 / (kappa^2 + (delta_c - N Y[psi])^2), and is refreshed on every
step. It is evaluated after the first half kinetic step, i.e. on the density
seen by the potential sub-step. The potential sub-step conserves |psi|^2 in
real time, so that sub-flow is solved exactly and the scheme stays second
order.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.fft as sp_fft

from .cavity import mode_profile
from .core import (ConvergenceError, Grid, ModelParams, NumericalError,
                   OrderParameter, gaussian, make_grid)
from .kernels import apply_potential, norm_sq, weighted_density

log = logging.getLogger(__name__)

DEFAULT_DT = 5e-4
DEFAULT_DTAU = 1e-3
EDGE_TOL = 1e-12


@dataclass
class PropagationResult:
    times: np.ndarray
    inversion: np.ndarray
    photon_number: np.ndarray
    energy: np.ndarray
    eta: np.ndarray
    snapshots: list = field(default_factory=list)
    norm_error: float = 0.0
    steps: int = 0


@dataclass
class GroundStateResult:
    psi: OrderParameter
    n_ss: float
    energy: float
    residual: float
    iterations: int
    chemical_potential: float = float("nan")
    dtau: float = float("nan")


class Propagator:
    """Per-run workspace: precomputed potentials, kinetic factors and weights."""

    def __init__(self, grid: Grid, p: ModelParams, dt: float, imaginary: bool = False):
        if not dt > 0:
            raise ValueError("dt must be > 0")
        self.grid = grid
        self.p = p
        self.dt = float(dt)
        self.imaginary = imaginary
        self.base = np.ascontiguousarray(0.5 * grid.x**2)
        self.shape = np.ascontiguousarray(mode_profile(grid, p))
        self.k2half = 0.5 * grid.k**2
        if imaginary:
            self.half_kin = np.exp(-self.k2half * self.dt / 2)
        else:
            self.half_kin = np.exp(-1j * self.k2half * self.dt / 2)
            self.full_kin = np.exp(-1j * self.k2half * self.dt)
        self.g_n = p.g_coll * p.n_atoms
        self.left_weight = inversion_weights(grid, p.barrier_offset)

    # observables on raw arrays

    def overlap(self, psi: np.ndarray, nrm: float = 1.0) -> float:
        return self.p.u0 * weighted_density(psi, self.shape) * self.grid.dx / nrm

    def photon_number(self, psi: np.ndarray, eta: float | None = None, nrm: float = 1.0) -> float:
        p = self.p
        eta = p.eta if eta is None else eta
        y = self.overlap(psi, nrm)
        return eta**2 / (p.kappa**2 + (p.delta_c - p.n_atoms * y) ** 2)

    def energy(self, psi: np.ndarray, eta: float | None = None) -> float:
        p = self.p
        eta = p.eta if eta is None else eta
        dx = self.grid.dx
        phik = sp_fft.fft(psi)
        kin = float(np.dot(self.k2half, phik.real**2 + phik.imag**2)) * dx / psi.size
        rho = psi.real**2 + psi.imag**2
        pot = float(np.dot(self.base, rho)) * dx
        if self.g_n:
            pot += 0.5 * self.g_n * float(np.dot(rho, rho)) * dx
        y = self.overlap(psi)
        cav = -(eta**2) / (p.kappa * p.n_atoms) * math.atan((p.delta_c - p.n_atoms * y) / p.kappa)
        return kin + pot + cav

    def hamiltonian_apply(self, psi: np.ndarray, eta: float | None = None) -> np.ndarray:
        n = self.photon_number(psi, eta)
        v = self.base + n * self.p.u0 * self.shape
        if self.g_n:
            v = v + self.g_n * np.abs(psi) ** 2
        return sp_fft.ifft(self.k2half * sp_fft.fft(psi)) + v * psi

    def residual(self, psi: np.ndarray, eta: float | None = None) -> tuple[float, float]:
        """(||(H - mu) psi||, mu) for a normalized state."""
        hpsi = self.hamiltonian_apply(psi, eta)
        mu = float(np.vdot(psi, hpsi).real) * self.grid.dx
        r = hpsi - mu * psi
        return math.sqrt(norm_sq(r) * self.grid.dx), mu

    def inversion(self, psi: np.ndarray) -> float:
        total = norm_sq(psi)
        left = weighted_density(psi, self.left_weight)
        return (total - 2 * left) / total

    # propagation

    def kinetic(self, psi: np.ndarray, half: bool = False) -> np.ndarray:
        factor = self.half_kin if half else self.full_kin
        return sp_fft.ifft(factor * sp_fft.fft(psi))

    def potential(self, phi: np.ndarray, eta: float | None = None) -> float:
        """Self-consistent potential sub-step, in place (real time); returns n_ss."""
        n_ss = self.photon_number(phi, eta)
        apply_potential(phi, self.base, self.shape, n_ss * self.p.u0, self.g_n, self.dt, False)
        return n_ss

    def step(self, psi: np.ndarray, eta: float | None = None,
             frozen_n_ss: float | None = None, odd: bool = False) -> tuple[np.ndarray, float]:
        """One Strang step; returns (new psi, photon number used)."""
        phi = sp_fft.ifft(self.half_kin * sp_fft.fft(psi))
        if self.imaginary:
            nrm = norm_sq(phi) * self.grid.dx
        else:
            nrm = 1.0
        if frozen_n_ss is None:
            n_ss = self.photon_number(phi, eta, nrm)
        else:
            n_ss = frozen_n_ss
        apply_potential(phi, self.base, self.shape, n_ss * self.p.u0, self.g_n / nrm,
                        self.dt, self.imaginary)
        out = sp_fft.ifft(self.half_kin * sp_fft.fft(phi))
        if self.imaginary:
            if odd:
                out = 0.5 * (out - self.grid.mirror(out))
            out /= math.sqrt(norm_sq(out) * self.grid.dx)
        return out, n_ss


def inversion_weights(grid: Grid, offset: float = 0.0) -> np.ndarray:
    """Cell weights of the region x < offset; the wrap-around sample counts half."""
    w = np.clip((offset - grid.x) / grid.dx + 0.5, 0.0, 1.0)
    w[0] *= 0.5
    return np.ascontiguousarray(w)


def _check_finite(psi: np.ndarray, where: str, partial=None):
    if not np.all(np.isfinite(psi)):
        raise NumericalError(f"non-finite wavefunction {where}", partial)


def _edge_density(psi: np.ndarray) -> float:
    return float(max(abs(psi[0]) ** 2, abs(psi[1]) ** 2, abs(psi[-1]) ** 2))


# -- public operations -------------------------------------------------------

def step(psi: OrderParameter, dt: float, p: ModelParams, mode: str = "real",
         frozen_n_ss: float | None = None) -> OrderParameter:
    """One split-step update of ``psi``.

    ``mode`` is ``"real"`` or ``"imaginary"``. With ``frozen_n_ss`` the photon
    number is held fixed instead of following the density.
    """
    if mode not in ("real", "imaginary"):
        raise ValueError(f"mode must be 'real' or 'imaginary', got {mode!r}")
    psi.require_normalized()
    prop = Propagator(psi.grid, p, dt, imaginary=(mode == "imaginary"))
    out, _ = prop.step(np.array(psi.values), frozen_n_ss=frozen_n_ss)
    _check_finite(out, "after step")
    return OrderParameter(out, psi.grid)


def energy_functional(psi: OrderParameter, p: ModelParams) -> float:
    """Energy per particle: kinetic + trap + interaction - (eta^2/kappa N) atan((delta_c - N Y)/kappa)."""
    psi.require_normalized()
    return Propagator(psi.grid, p, 1.0).energy(psi.values)


def inversion(psi: OrderParameter, p: ModelParams) -> float:
    """Population imbalance right minus left of the barrier centre."""
    psi.require_normalized()
    return Propagator(psi.grid, p, 1.0).inversion(psi.values)


def chemical_potential(psi: OrderParameter, p: ModelParams) -> float:
    psi.require_normalized()
    return Propagator(psi.grid, p, 1.0).residual(np.array(psi.values))[1]


def ground_state_imaginary_time(p: ModelParams, grid: Grid | None = None,
                                init: OrderParameter | None = None, tol: float = 1e-9,
                                dtau: float = DEFAULT_DTAU, max_steps: int = 400_000,
                                odd: bool = False, check_every: int = 50,
                                max_refinements: int = 3) -> GroundStateResult:
    """Lowest self-consistent stationary state by normalized imaginary-time descent.

    Converged once the energy changes by less than ``tol`` per unit imaginary
    time and ||(H - mu) psi|| < sqrt(tol). If the energy has settled but the
    residual has not, the step is cut by 4 (the Strang fixed point carries a
    dtau^2 bias), up to ``max_refinements`` times.

    ``odd=True`` projects onto states odd about x = 0 on every step, which gives
    the antisymmetric partner in a symmetric double well. For a symmetric well
    the initial state is symmetrized (or antisymmetrized) first.
    """
    if not tol > 0:
        raise ValueError("tol must be > 0")
    grid = grid or (init.grid if init is not None else make_grid())
    if init is None:
        psi = (grid.x * np.exp(-grid.x**2 / 2) if odd else np.exp(-grid.x**2 / 2)).astype(complex)
    else:
        psi = np.array(init.values, dtype=complex)
    symmetric_well = p.barrier_offset == 0.0
    if odd and not symmetric_well:
        raise ValueError("odd-parity projection needs barrier_offset == 0")
    if symmetric_well:
        psi = 0.5 * (psi - grid.mirror(psi)) if odd else 0.5 * (psi + grid.mirror(psi))
    nrm = norm_sq(psi) * grid.dx
    if not nrm > 0:
        raise ValueError("initial state has zero norm (or no component of the requested parity)")
    psi /= math.sqrt(nrm)

    res_tol = math.sqrt(tol)
    cur_dtau = dtau
    prop = Propagator(grid, p, cur_dtau, imaginary=True)
    e_prev = prop.energy(psi)
    refinements = 0
    steps = 0
    residual = mu = float("nan")
    while steps < max_steps:
        for _ in range(check_every):
            psi, _ = prop.step(psi, odd=odd)
        steps += check_every
        _check_finite(psi, f"in imaginary time after {steps} steps")
        e = prop.energy(psi)
        rate = abs(e - e_prev) / (check_every * cur_dtau)
        e_prev = e
        if rate < tol:
            residual, mu = prop.residual(psi)
            if residual < res_tol:
                break
            if refinements < max_refinements:
                refinements += 1
                cur_dtau /= 4
                prop = Propagator(grid, p, cur_dtau, imaginary=True)
                log.debug("energy settled, residual %.3e; dtau -> %.3g", residual, cur_dtau)
    else:
        residual, mu = prop.residual(psi)
        last = GroundStateResult(OrderParameter(psi, grid), prop.photon_number(psi),
                                 prop.energy(psi), residual, steps, mu, cur_dtau)
        raise ConvergenceError(
            f"imaginary-time descent did not converge in {max_steps} steps "
            f"(residual {residual:.3e})", last)
    return GroundStateResult(OrderParameter(psi, grid), prop.photon_number(psi), e,
                             residual, steps, mu, cur_dtau)


def symmetric_pair(p: ModelParams, grid: Grid | None = None, tol: float = 1e-9,
                   dtau: float = DEFAULT_DTAU) -> tuple[GroundStateResult, GroundStateResult]:
    """Symmetric ground state and its odd-parity partner."""
    grid = grid or make_grid()
    sym = ground_state_imaginary_time(p, grid, tol=tol, dtau=dtau)
    # seed the odd solve with the symmetric density folded to odd parity
    seed = np.sign(grid.x) * np.abs(sym.psi.values)
    asym = ground_state_imaginary_time(p, grid, init=OrderParameter(seed, grid), tol=tol,
                                       dtau=dtau, odd=True)
    return sym, asym


def localized_modes(p: ModelParams, grid: Grid | None = None, tol: float = 1e-9,
                    dtau: float = DEFAULT_DTAU) -> tuple[OrderParameter, OrderParameter]:
    """(psi_L, psi_R) = (psi_sym -+ psi_asym) / sqrt(2)."""
    sym, asym = symmetric_pair(p, grid, tol, dtau)
    grid = sym.psi.grid
    s = sym.psi.values
    a = asym.psi.values
    # remove global phases so both are real and positive on the right
    s = s * np.exp(-1j * np.angle(np.vdot(np.ones_like(s), s)))
    right = grid.x > p.barrier_offset
    overlap_right = np.vdot(s[right], a[right])
    a = a * np.exp(-1j * np.angle(overlap_right))
    psi_l = OrderParameter((s - a) / math.sqrt(2), grid)
    psi_r = OrderParameter((s + a) / math.sqrt(2), grid)
    return psi_l, psi_r


Schedule = Sequence[tuple[float, float]]


def _eta_function(p: ModelParams, schedule: Schedule | None) -> Callable[[float], float]:
    if schedule is None:
        return lambda t: p.eta
    knots = np.asarray(schedule, dtype=float)
    if knots.ndim != 2 or knots.shape[1] != 2 or len(knots) < 1:
        raise ValueError("schedule must be a sequence of (t, eta) pairs")
    if np.any(np.diff(knots[:, 0]) <= 0):
        raise ValueError("schedule times must be strictly increasing")
    if np.any(knots[:, 1] < 0):
        raise ValueError("scheduled eta must be >= 0")
    ts, etas = knots[:, 0].copy(), knots[:, 1].copy()
    return lambda t: float(np.interp(t, ts, etas))


def evolve(psi0: OrderParameter, t_final: float, dt: float, p: ModelParams,
           schedule: Schedule | None = None, snapshot_every: float | None = None,
           record_every: float | None = None, edge_tol: float = EDGE_TOL) -> PropagationResult:
    """Real-time self-consistent evolution recording Z, n_ss, E (and eta).

    ``schedule`` is a piecewise-linear pump ramp given as (t, eta) knots; eta is
    taken at the midpoint of every step. ``record_every`` and
    ``snapshot_every`` are in time units (defaults: every 10 steps, no
    snapshots). Raises :class:`NumericalError` with the partial record if the
    state becomes non-finite or density reaches the periodic boundary.
    """
    if not t_final > 0:
        raise ValueError("t_final must be > 0")
    psi0.require_normalized()
    grid = psi0.grid
    eta_of = _eta_function(p, schedule)
    prop = Propagator(grid, p, dt)
    n_steps = int(round(t_final / dt))
    rec_stride = max(1, int(round(record_every / dt))) if record_every else 10
    snap_stride = max(1, int(round(snapshot_every / dt))) if snapshot_every else 0

    psi = np.array(psi0.values)
    times, zs, ns, es, etas, snaps = [], [], [], [], [], []
    max_norm_err = 0.0

    def partial():
        return PropagationResult(np.array(times), np.array(zs), np.array(ns), np.array(es),
                                 np.array(etas), snaps, max_norm_err, len(times))

    def record(i):
        nonlocal max_norm_err
        t = i * dt
        eta = eta_of(t)
        times.append(t)
        zs.append(prop.inversion(psi))
        ns.append(prop.photon_number(psi, eta))
        es.append(prop.energy(psi, eta))
        etas.append(eta)
        max_norm_err = max(max_norm_err, abs(norm_sq(psi) * grid.dx - 1.0))

    record(0)
    if snap_stride:
        snaps.append((0.0, OrderParameter(psi, grid)))
    # Consecutive half kinetic steps are fused: phi lives half a kinetic step
    # ahead of psi, and psi is rebuilt only where it is observed.
    phi = prop.kinetic(psi, half=True)
    for i in range(1, n_steps + 1):
        prop.potential(phi, eta_of((i - 0.5) * dt))
        observe = i % rec_stride == 0 or i == n_steps
        snap = snap_stride and i % snap_stride == 0
        if observe or snap:
            psi = prop.kinetic(phi, half=True)
            if observe:
                _check_finite(psi, f"at t = {i * dt:.6g}", partial())
                edge = _edge_density(psi)
                if edge > edge_tol:
                    raise NumericalError(
                        f"density {edge:.3e} reached the periodic boundary at t = {i * dt:.6g}; "
                        "enlarge x_max", partial())
                record(i)
            if snap:
                snaps.append((i * dt, OrderParameter(psi, grid)))
        if i < n_steps:
            phi = prop.kinetic(phi)
    return PropagationResult(np.array(times), np.array(zs), np.array(ns), np.array(es),
                             np.array(etas), snaps, max_norm_err, n_steps)


def displaced_gaussian(grid: Grid, center: float = 2.0, width: float = 0.8) -> OrderParameter:
    return gaussian(grid, center, width)


def is_double_peaked(psi: OrderParameter, offset: float = 0.0) -> bool:
    """True if |psi|^2 has a local minimum at the barrier centre."""
    grid = psi.grid
    j = int(np.argmin(np.abs(grid.x - offset)))
    rho = psi.density
    return bool(rho[j] <= rho[j - 1] and rho[j] <= rho[j + 1] and rho[j] < rho.max())
