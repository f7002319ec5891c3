"""Two-mode (Bose-Hubbard-like) description of the cavity double well.

Atoms occupy one Gaussian mode per well, psi_{L,R} centred at -+x0 with width
sigma. Eliminating the cavity gives

    H = (E0 + S0) N + f(N) - t(N) B,    B = b_R^+ b_L + b_L^+ b_R
    t(N) = -E1 - S1 - eta^2 U0 J1 / (kappa^2 + (delta_c - U0 J0 N)^2)
    f(N) = -(eta^2 / kappa) atan((delta_c - U0 J0 N) / kappa)

N commutes with H, so every N sector flops independently at frequency 2 t(N).
A coherent initial state then gives the Poisson-weighted collapse-revival
signal Z_MB(t). f is constant inside a sector and never enters Z_MB; its sign
follows the energy functional.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm
from scipy.optimize import minimize_scalar
from scipy.stats import poisson

from .cavity import well_minimum_position
from .core import ModelParams, NoDoubleWellError
from .kernels import sector_sum

log = logging.getLogger(__name__)

TAIL_TOL = 1e-12
MAX_FOCK_N = 12


def two_level_inversion(J: float, delta: float, t) -> np.ndarray:
    """Z(t) for H = [[E_L, -J], [-J, E_R]], delta = E_L - E_R, started in the right well."""
    h = np.array([[delta / 2, -J], [-J, -delta / 2]], dtype=complex)
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    psi0 = np.array([0.0, 1.0], dtype=complex)
    z = np.empty(ts.shape)
    for i, ti in enumerate(ts):
        c = expm(-1j * h * ti) @ psi0
        z[i] = abs(c[1]) ** 2 - abs(c[0]) ** 2
    return z if np.ndim(t) else z[0]


@dataclass(frozen=True)
class TwoModeCoefficients:
    e0: float
    e1: float
    j0: float
    j1: float
    s0: float
    s1: float
    sigma: float
    x0: float
    n_ss: float = float("nan")


def overlap_coefficients(sigma: float, x0: float, p: ModelParams,
                         n_ss: float = float("nan")) -> TwoModeCoefficients:
    """Closed-form overlap integrals with orthogonality imposed by hand.

    E1 keeps the conventional form E0 exp(-x0^2/sigma^2); the bare Gaussian
    integral differs from it by -x0^2 exp(-x0^2/sigma^2) / (2 sigma^4), which
    is negligible once the wells are well separated.
    """
    if not sigma > 0:
        raise ValueError("sigma must be > 0")
    if x0 < 0:
        raise ValueError("x0 must be >= 0")
    q = math.exp(-(x0**2) / sigma**2)
    big_s = p.delta_x**2 + sigma**2
    pre = p.delta_x / math.sqrt(big_s)
    e0 = 1 / (4 * sigma**2)
    return TwoModeCoefficients(
        e0=e0, e1=e0 * q,
        j0=pre * math.exp(-(x0**2) / big_s), j1=pre * q,
        s0=0.5 * (x0**2 + sigma**2 / 2), s1=sigma**2 / 4 * q,
        sigma=sigma, x0=x0, n_ss=n_ss)


@dataclass(frozen=True)
class TwoModeModel:
    coeffs: TwoModeCoefficients
    params: ModelParams

    def _denominator(self, n):
        p, c = self.params, self.coeffs
        return p.kappa**2 + (p.delta_c - p.u0 * c.j0 * np.asarray(n, dtype=float)) ** 2

    def t_of_n(self, n):
        p, c = self.params, self.coeffs
        return -c.e1 - c.s1 - p.eta**2 * p.u0 * c.j1 / self._denominator(n)

    def f_of_n(self, n):
        p, c = self.params, self.coeffs
        arg = (p.delta_c - p.u0 * c.j0 * np.asarray(n, dtype=float)) / p.kappa
        return -(p.eta**2) / p.kappa * np.arctan(arg)

    def onsite(self, n):
        return (self.coeffs.e0 + self.coeffs.s0) * np.asarray(n, dtype=float) + self.f_of_n(n)


def tunneling_t(n, model: TwoModeModel):
    if np.any(np.asarray(n) < 0):
        raise ValueError("N must be >= 0")
    out = model.t_of_n(n)
    return float(out) if np.ndim(out) == 0 else out


def f_of_n(n, model: TwoModeModel):
    out = model.f_of_n(n)
    return float(out) if np.ndim(out) == 0 else out


# -- self-consistent coefficients ---------------------------------------------

def _pair_energy(sigma, x0, p):
    c = overlap_coefficients(sigma, x0, p)
    return (c.e0 + c.e1 + c.s0 + c.s1
            - p.eta**2 / (p.kappa * p.n_atoms)
            * math.atan((p.delta_c - p.u0 * p.n_atoms * (c.j0 + c.j1)) / p.kappa))


_SIGMA_SCAN = np.geomspace(0.02, 10.0, 2000)


def _best_sigma(x0, p):
    # the energy is multimodal in sigma: scan, then refine the best bracket
    e = np.array([_pair_energy(s, x0, p) for s in _SIGMA_SCAN])
    i = int(np.argmin(e))
    lo, hi = _SIGMA_SCAN[max(i - 1, 0)], _SIGMA_SCAN[min(i + 1, _SIGMA_SCAN.size - 1)]
    res = minimize_scalar(_pair_energy, bounds=(lo, hi), args=(x0, p), method="bounded",
                          options={"xatol": 1e-13})
    return float(res.x)


def _map(n_ss, p):
    """One fixed-point update n_ss -> (sigma, x0, n_ss')."""
    x0 = well_minimum_position(n_ss, p)
    sigma = _best_sigma(x0, p)
    c = overlap_coefficients(sigma, x0, p)
    n_new = p.eta**2 / (p.kappa**2 + (p.delta_c - p.u0 * c.j0 * p.n_atoms) ** 2)
    return sigma, x0, n_new


class FixedPoints(list):
    """List of models plus the guesses that were skipped, with reasons."""

    def __init__(self, items=(), skipped=()):
        super().__init__(items)
        self.skipped = list(skipped)


def _iterate(n, p, mix, max_iter, rtol):
    for _ in range(max_iter):
        sigma, x0, n_new = _map(n, p)
        if abs(n_new - n) < rtol * n:
            return sigma, x0, n_new
        n = (1 - mix) * n + mix * n_new
    return None


def default_guesses(p: ModelParams) -> list:
    top = p.max_photons
    return [g for g in (0.01, 1.0, 0.99 * top) if 0 < g <= top] or [top]


def self_consistent_model(p: ModelParams, n_ss_guesses=None, rtol: float = 1e-10,
                          max_iter: int = 2000) -> FixedPoints:
    """Solve the coupled (x0, sigma, n_ss) equations from several starting photon numbers.

    Each guess is iterated directly, then with 0.5 mixing if that does not
    settle. Guesses that leave the double-well region or never converge are
    recorded in ``.skipped``. Fixed points are returned deduplicated, sorted by
    photon number.
    """
    guesses = list(n_ss_guesses) if n_ss_guesses is not None else default_guesses(p)
    if not guesses:
        raise ValueError("need at least one n_ss guess")
    found, skipped = [], []
    for g in guesses:
        if not g > 0:
            skipped.append((g, "guess must be > 0"))
            continue
        try:
            sol = _iterate(g, p, 1.0, max_iter, rtol) or _iterate(g, p, 0.5, max_iter, rtol)
        except NoDoubleWellError as exc:
            skipped.append((g, str(exc)))
            continue
        if sol is None:
            skipped.append((g, "fixed-point iteration did not converge"))
            continue
        sigma, x0, n_ss = sol
        if any(abs(n_ss - m.coeffs.n_ss) < 1e-6 * n_ss for m in found):
            continue
        found.append(TwoModeModel(overlap_coefficients(sigma, x0, p, n_ss), p))
    for g, why in skipped:
        log.info("two-mode guess n_ss=%g skipped: %s", g, why)
    found.sort(key=lambda m: m.coeffs.n_ss)
    return FixedPoints(found, skipped)


def fixed_point_residual(model: TwoModeModel) -> float:
    """|F(n) - n| / n of the self-consistency map at the model's photon number."""
    n = model.coeffs.n_ss
    return abs(_map(n, model.params)[2] - n) / n


# -- spectrum and dynamics ----------------------------------------------------

def spectrum(n: int, model: TwoModeModel) -> np.ndarray:
    """E_k = (E0 + S0) N + f(N) - t(N) (N - 2k), k = 0..N."""
    if int(n) != n or n < 0:
        raise ValueError("N must be a non-negative integer")
    n = int(n)
    k = np.arange(n + 1)
    return float(model.onsite(n)) - float(model.t_of_n(n)) * (n - 2 * k)


def fock_hamiltonian(n: int, model: TwoModeModel) -> np.ndarray:
    """H in the basis |k, n-k> (k atoms left, n-k right), k = 0..n."""
    h = np.diag(np.full(n + 1, float(model.onsite(n))))
    t = float(model.t_of_n(n))
    for k in range(1, n + 1):
        # b_R^+ b_L |k, n-k> = sqrt(k (n-k+1)) |k-1, n-k+1>
        amp = -t * math.sqrt(k * (n - k + 1))
        h[k - 1, k] = h[k, k - 1] = amp
    return h


def exact_fock_evolution(n: int, model: TwoModeModel, times, initial_well: str = "right",
                         return_norm: bool = False):
    """<n_R - n_L>/n for all n atoms starting in one well, by dense exponentiation."""
    if int(n) != n or not 1 <= n <= MAX_FOCK_N:
        raise ValueError(f"n must be an integer in [1, {MAX_FOCK_N}]")
    if initial_well not in ("left", "right"):
        raise ValueError("initial_well must be 'left' or 'right'")
    n = int(n)
    # the onsite term is a global phase; dropping it keeps expm accurate at long times
    h = fock_hamiltonian(n, model) - float(model.onsite(n)) * np.eye(n + 1)
    psi0 = np.zeros(n + 1, dtype=complex)
    psi0[n if initial_well == "left" else 0] = 1.0
    k = np.arange(n + 1)
    imbalance = (n - 2 * k) / n
    ts = np.atleast_1d(np.asarray(times, dtype=float))
    z = np.empty(ts.shape)
    norms = np.empty(ts.shape)
    for i, ti in enumerate(ts):
        c = expm(-1j * h * ti) @ psi0
        prob = np.abs(c) ** 2
        norms[i] = prob.sum()
        z[i] = prob @ imbalance
    return (z, norms) if return_norm else z


def sector_inversion(n, model: TwoModeModel, times) -> np.ndarray:
    """Per-sector law Z_n(t) = cos(2 t(n) t), all atoms initially right."""
    return np.cos(2 * float(model.t_of_n(n)) * np.asarray(times, dtype=float))


def default_n_max(n_bar: float) -> int:
    return int(math.ceil(n_bar + 12 * math.sqrt(n_bar) + 10))


def _sector_weights(n_bar, n_max):
    n = np.arange(n_max + 1)
    w = poisson.pmf(n, n_bar) * n / n_bar
    tail = float(poisson.sf(n_max, n_bar))
    if tail > TAIL_TOL:
        warnings.warn(f"Poisson tail beyond n_max={n_max} is {tail:.2e} > {TAIL_TOL:g}",
                      RuntimeWarning, stacklevel=3)
    return n, w


def _check_n_bar(n_bar, n_max):
    if not n_bar > 0:
        raise ValueError("n_bar must be > 0")
    if n_max is None:
        return default_n_max(n_bar)
    if n_max < n_bar + 10 * math.sqrt(n_bar):
        raise ValueError("n_max must be >= n_bar + 10 sqrt(n_bar)")
    return int(n_max)


def collapse_revival_signal(n_bar: float, times, model: TwoModeModel,
                            n_max: int | None = None, initial_well: str = "right") -> np.ndarray:
    """Complex S(t) = sum_n P(n) (n/n_bar) exp(2 i t(n) t); Z_MB = Re S, envelope = |S|."""
    n_max = _check_n_bar(n_bar, n_max)
    n, w = _sector_weights(n_bar, n_max)
    freqs = 2 * np.asarray(model.t_of_n(n), dtype=float)
    s = sector_sum(np.ascontiguousarray(w), np.ascontiguousarray(freqs),
                   np.ascontiguousarray(np.asarray(times, dtype=float)))
    return -s if initial_well == "left" else s


def collapse_revival_inversion(n_bar: float, times, model: TwoModeModel,
                               n_max: int | None = None, initial_well: str = "right") -> np.ndarray:
    """Z_MB(t) = (1/n_bar) sum_n e^{-n_bar} n_bar^n / n! * n * cos(2 t(n) t)."""
    return collapse_revival_signal(n_bar, times, model, n_max, initial_well).real


def envelope(n_bar: float, times, model: TwoModeModel, n_max: int | None = None) -> np.ndarray:
    return np.abs(collapse_revival_signal(n_bar, times, model, n_max))


def collapse_time(times, env) -> float:
    """First time the envelope drops below 1/e of its initial value (nan if never)."""
    times, env = np.asarray(times), np.asarray(env)
    below = np.nonzero(env < env[0] / math.e)[0]
    return float(times[below[0]]) if below.size else float("nan")


def first_revival(times, env) -> tuple[float, float]:
    """(time, height) of the first envelope maximum after the collapse.

    The revival is the first stretch after the collapse where the envelope
    exceeds half its post-collapse maximum; its peak is reported.
    """
    times, env = np.asarray(times), np.asarray(env)
    below = np.nonzero(env < env[0] / math.e)[0]
    if not below.size:
        return float("nan"), float("nan")
    after = env[below[0]:]
    level = 0.5 * after.max()
    above = np.nonzero(after > level)[0]
    start = above[0]
    stop = start
    while stop + 1 < after.size and after[stop + 1] > level:
        stop += 1
    j = start + int(np.argmax(after[start:stop + 1]))
    return float(times[below[0] + j]), float(after[j])


def tunneling_slope(n_bar: float, model: TwoModeModel) -> float:
    return float(model.t_of_n(n_bar + 1) - model.t_of_n(n_bar - 1)) / 2


def revival_time(n_bar: float, model: TwoModeModel) -> float:
    """T_r = pi / |dt/dN| at n_bar (central difference, step 1); inf if the slope vanishes."""
    slope = tunneling_slope(n_bar, model)
    return math.inf if slope == 0 else math.pi / abs(slope)
