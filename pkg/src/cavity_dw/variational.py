"""Double-peaked Gaussian ansatz and its energy landscape E(sigma, x0).

psi(x) = C [exp(-(x + x0)^2 / 2 sigma^2) + exp(-(x - x0)^2 / 2 sigma^2)]

With q = exp(-x0^2 / sigma^2) the normalization is
C = 1 / (pi^{1/4} sqrt(2 sigma (1 + q))), and every term of the energy is a
Gaussian integral:

    kinetic    1/(4 sigma^2) - x0^2 q / (2 sigma^4 (1 + q))
    trap       sigma^2/4 + x0^2 / (2 (1 + q))
    |psi|^4    (2 + 8 q^{3/2} + 6 q^2) / (4 sqrt(2 pi) sigma (1 + q)^2)
    J = Y/U0   (dx/sqrt(S)) [cosh-like pair + q exp(-b^2/S)] / (1 + q),  S = sigma^2 + dx^2

The density has a local minimum at the origin iff x0 > sigma.
"""
from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .cavity import overlap_y, steady_state_photon_number
from .core import Grid, ModelParams, OrderParameter, make_grid, normalize

log = logging.getLogger(__name__)

SINGLE_PEAK = "single_peak"
DOUBLE_PEAK = "double_peak"
# x0 / sigma above which the ansatz density dips at the origin
C_STAR = 1.0

SEED_GRIDS = {
    "coarse": (np.linspace(0.3, 3.0, 10), np.linspace(0.0, 5.0, 11)),
    "fine": (np.linspace(0.15, 3.0, 20), np.linspace(0.0, 5.0, 21)),
}


@dataclass
class VariationalPoint:
    sigma: float
    x0: float
    energy: float
    n_ss: float
    branch: str
    is_global: bool = False


def branch_label(sigma: float, x0: float) -> str:
    return DOUBLE_PEAK if x0 > C_STAR * sigma else SINGLE_PEAK


def ansatz_density(sigma: float, x0: float, grid: Grid) -> OrderParameter:
    """Sampled ansatz, normalized on the grid."""
    if not sigma > 0:
        raise ValueError("sigma must be > 0")
    x = grid.x
    vals = np.exp(-((x + x0) ** 2) / (2 * sigma**2)) + np.exp(-((x - x0) ** 2) / (2 * sigma**2))
    return normalize(OrderParameter(vals.astype(complex), grid))


def normalization_constant(sigma: float, x0: float) -> float:
    q = math.exp(-(x0**2) / sigma**2)
    return 1.0 / (math.pi**0.25 * math.sqrt(2 * sigma * (1 + q)))


def _terms(sigma, x0, delta_x, offset, exp, sqrt):
    # generic in the math module so that cmath gives complex-step derivatives
    s2 = sigma * sigma
    q = exp(-x0 * x0 / s2)
    kin = 1 / (4 * s2) - x0 * x0 * q / (2 * s2 * s2 * (1 + q))
    trap = s2 / 4 + x0 * x0 / (2 * (1 + q))
    quart = (2 + 8 * q * sqrt(q) + 6 * q * q) / (4 * math.sqrt(2 * math.pi) * sigma * (1 + q) ** 2)
    big_s = s2 + delta_x**2
    pair = 0.5 * (exp(-(x0 - offset) ** 2 / big_s) + exp(-(x0 + offset) ** 2 / big_s))
    j = delta_x / sqrt(big_s) * (pair + q * exp(-offset * offset / big_s)) / (1 + q)
    return kin, trap, quart, j


def ansatz_overlap(sigma: float, x0: float, p: ModelParams) -> float:
    """Y(sigma, x0) = U0 * J, cross term included."""
    return p.u0 * _terms(sigma, x0, p.delta_x, p.barrier_offset, math.exp, math.sqrt)[3]


def _closed_energy(sigma, x0, p, exp=math.exp, sqrt=math.sqrt, atan=math.atan):
    kin, trap, quart, j = _terms(sigma, x0, p.delta_x, p.barrier_offset, exp, sqrt)
    e = kin + trap + 0.5 * p.g_coll * p.n_atoms * quart
    if p.eta:
        e = e - p.eta**2 / (p.kappa * p.n_atoms) * atan((p.delta_c - p.n_atoms * p.u0 * j) / p.kappa)
    return e


def variational_energy(sigma: float, x0: float, p: ModelParams, method: str = "closed",
                       grid: Grid | None = None) -> float:
    """Energy per particle of the ansatz.

    ``method="closed"`` uses the Gaussian-integral closed form;
    ``method="quadrature"`` samples the ansatz on ``grid`` and evaluates the
    grid energy functional (spectral kinetic term).
    """
    if not sigma > 0:
        raise ValueError("sigma must be > 0")
    if method == "closed":
        return _closed_energy(sigma, abs(x0), p)
    if method == "quadrature":
        from .gpe import energy_functional
        grid = grid or make_grid(2048, 16.0)
        return energy_functional(ansatz_density(sigma, x0, grid), p)
    raise ValueError(f"unknown method {method!r}")


def energy_gradient(sigma: float, x0: float, p: ModelParams, h: float = 1e-20) -> np.ndarray:
    """(dE/dsigma, dE/dx0) by complex-step differentiation of the closed form."""
    fn = lambda s, x: _closed_energy(s, x, p, cmath.exp, cmath.sqrt, cmath.atan)
    return np.array([fn(complex(sigma, h), x0).imag / h,
                     fn(sigma, complex(x0, h)).imag / h])


def hessian(sigma: float, x0: float, p: ModelParams, h: float = 1e-4) -> np.ndarray:
    """Central-difference Hessian in (sigma, x0); E is even in x0."""
    f = lambda s, x: _closed_energy(s, abs(x), p)
    e = f(sigma, x0)
    hss = (f(sigma + h, x0) - 2 * e + f(sigma - h, x0)) / h**2
    hxx = (f(sigma, x0 + h) - 2 * e + f(sigma, x0 - h)) / h**2
    hsx = (f(sigma + h, x0 + h) - f(sigma + h, x0 - h)
           - f(sigma - h, x0 + h) + f(sigma - h, x0 - h)) / (4 * h * h)
    return np.array([[hss, hsx], [hsx, hxx]])


# -- branch search -----------------------------------------------------------
# Minimization runs in (ln sigma, u = x0^2): sigma stays positive and the
# x0 -> -x0 symmetry becomes a smooth boundary at u = 0 (E mirrored for u < 0).

def _objective(z, p):
    return _closed_energy(math.exp(z[0]), math.sqrt(abs(z[1])), p)


def _descend(z, p, xatol, fatol, maxiter, restarts=1):
    res = None
    for _ in range(restarts):
        res = minimize(_objective, z, args=(p,), method="Nelder-Mead",
                       options={"xatol": xatol, "fatol": fatol, "maxiter": maxiter})
        z = res.x
    return res


def _sigma_at_zero(sigma, p):
    res = minimize(lambda z: _closed_energy(math.exp(z[0]), 0.0, p), [math.log(sigma)],
                   method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-16})
    return math.exp(res.x[0]), float(res.fun)


def find_branches(p: ModelParams, seed_grid: str = "coarse",
                  grid: Grid | None = None) -> list[VariationalPoint]:
    """All local minima of E(sigma, x0) reached from the multi-start grid.

    Starts are descended loosely, near-duplicates merged, and the survivors
    polished with restarted simplex searches. Points that are not local minima
    (numerical Hessian with a clearly negative eigenvalue) are dropped.
    """
    if seed_grid not in SEED_GRIDS:
        raise ValueError(f"seed_grid must be one of {sorted(SEED_GRIDS)}")
    grid = grid or make_grid()
    sigmas, x0s = SEED_GRIDS[seed_grid]
    rough = []
    for s in sigmas:
        for x in x0s:
            try:
                res = _descend([math.log(s), x * x], p, 1e-5, 1e-13, 4000)
            except (ValueError, OverflowError, FloatingPointError) as exc:
                log.debug("start (%g, %g) dropped: %s", s, x, exc)
                continue
            if not np.all(np.isfinite(res.x)):
                continue
            sig, x0 = math.exp(res.x[0]), math.sqrt(abs(res.x[1]))
            if not any(abs(sig - a) < 1e-2 and abs(x0 - b) < 1e-2 for a, b in rough):
                rough.append((sig, x0))

    found = []
    for sig, x0 in rough:
        res = _descend([math.log(sig), x0 * x0], p, 1e-11, 1e-16, 20000, restarts=3)
        sig, x0, e = math.exp(res.x[0]), math.sqrt(abs(res.x[1])), float(res.fun)
        s_zero, e_zero = _sigma_at_zero(sig, p)
        if e_zero <= e + 1e-12:
            sig, x0, e = s_zero, 0.0, e_zero
        if any(abs(sig - a) < 1e-3 and abs(x0 - b) < 1e-3 for a, b, _ in found):
            continue
        eig = np.linalg.eigvalsh(hessian(sig, x0, p))
        if eig[0] < -1e-6 * max(1.0, abs(eig[-1])):
            log.debug("saddle at (%g, %g) dropped, eigenvalues %s", sig, x0, eig)
            continue
        found.append((sig, x0, e))

    if not found:
        raise RuntimeError("variational search found no minimum")
    found.sort(key=lambda t: (t[2], t[0], t[1]))
    points = []
    for i, (sig, x0, e) in enumerate(found):
        psi = ansatz_density(sig, x0, grid)
        n_ss = steady_state_photon_number(overlap_y(psi, p), p)
        points.append(VariationalPoint(sig, x0, e, n_ss, branch_label(sig, x0), i == 0))
    return points


# -- pump sweep --------------------------------------------------------------

@dataclass
class SweepRow:
    eta: float
    branches: list
    n_ss_gpe: float = float("nan")
    gpe_energy: float = float("nan")
    gpe_double_peak: bool = False
    gpe_psi: OrderParameter | None = None
    error: str | None = None

    @property
    def global_branch(self) -> VariationalPoint | None:
        return next((b for b in self.branches if b.is_global), None)


@dataclass
class SweepResult:
    rows: list = field(default_factory=list)

    @property
    def failures(self) -> list:
        return [(r.eta, r.error) for r in self.rows if r.error]

    @property
    def etas(self) -> np.ndarray:
        return np.array([r.eta for r in self.rows])

    @property
    def n_ss_gpe(self) -> np.ndarray:
        return np.array([r.n_ss_gpe for r in self.rows])

    @property
    def n_ss_ansatz(self) -> np.ndarray:
        return np.array([r.global_branch.n_ss if r.global_branch else np.nan for r in self.rows])


def sweep_pump(p: ModelParams, eta_values, grid: Grid | None = None, with_gpe: bool = True,
               seed_grid: str = "coarse", gpe_tol: float = 1e-9) -> SweepResult:
    """Variational branches, and the GPE ground state, at each pump strength.

    The GPE solve is seeded with the ansatz of every branch found; the lowest
    converged energy is kept. Failures at one eta are recorded in the row and
    the sweep continues.
    """
    from .gpe import ground_state_imaginary_time, is_double_peaked

    etas = np.asarray(eta_values, dtype=float)
    if etas.size == 0:
        raise ValueError("eta_values must be non-empty")
    if np.any(np.diff(etas) <= 0):
        raise ValueError("eta_values must be strictly ascending")
    grid = grid or make_grid()
    out = SweepResult()
    for eta in etas:
        q = p.replace(eta=float(eta))
        row = SweepRow(float(eta), [])
        try:
            row.branches = find_branches(q, seed_grid, grid)
            if with_gpe:
                best = None
                for b in row.branches:
                    gs = ground_state_imaginary_time(q, grid, init=ansatz_density(b.sigma, b.x0, grid),
                                                     tol=gpe_tol)
                    if best is None or gs.energy < best.energy:
                        best = gs
                row.n_ss_gpe = best.n_ss
                row.gpe_energy = best.energy
                row.gpe_double_peak = is_double_peaked(best.psi, q.barrier_offset)
                row.gpe_psi = best.psi
        except Exception as exc:  # aggregated, reported via SweepResult.failures
            log.warning("sweep point eta=%g failed: %s", eta, exc)
            row.error = f"{type(exc).__name__}: {exc}"
        out.rows.append(row)
    return out
