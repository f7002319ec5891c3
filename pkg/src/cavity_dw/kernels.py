"""Hot inner loops, in two interchangeable flavours.

Every kernel exists as ``<name>_nb`` (numba, fused loops) and ``<name>_np``
(vectorised numpy). The unsuffixed name is bound to one of them according to
``cavity_dw._accel.USE_NUMBA``. Both flavours are importable so that tests and
``benchmarks/bench_kernels.py`` can compare them directly.
"""
import math

import numpy as np

from ._accel import USE_NUMBA, njit


# -- potential phase ---------------------------------------------------------

@njit
def apply_potential_nb(psi, base, shape, barrier, g_n, dt, imaginary):
    n = psi.shape[0]
    for j in range(n):
        re = psi[j].real
        im = psi[j].imag
        v = base[j] + barrier * shape[j] + g_n * (re * re + im * im)
        if imaginary:
            psi[j] = psi[j] * math.exp(-v * dt)
        else:
            a = v * dt
            psi[j] = psi[j] * complex(math.cos(a), -math.sin(a))


def apply_potential_np(psi, base, shape, barrier, g_n, dt, imaginary):
    v = base + barrier * shape
    if g_n != 0.0:
        v = v + g_n * (psi.real**2 + psi.imag**2)
    if imaginary:
        psi *= np.exp(-v * dt)
    else:
        psi *= np.exp(-1j * dt * v)


# -- weighted density sums ---------------------------------------------------

@njit
def weighted_density_nb(psi, weight):
    acc = 0.0
    for j in range(psi.shape[0]):
        acc += (psi[j].real ** 2 + psi[j].imag ** 2) * weight[j]
    return acc


def weighted_density_np(psi, weight):
    return float(np.dot(psi.real**2 + psi.imag**2, weight))


@njit
def norm_sq_nb(psi):
    acc = 0.0
    for j in range(psi.shape[0]):
        acc += psi[j].real ** 2 + psi[j].imag ** 2
    return acc


def norm_sq_np(psi):
    return float(np.vdot(psi, psi).real)


# -- Poisson-weighted sector sum ---------------------------------------------
# S(t) = sum_n w_n exp(i f_n t), summed in ascending n with Kahan compensation.

@njit
def sector_sum_nb(weights, freqs, times):
    nt = times.shape[0]
    out = np.empty(nt, dtype=np.complex128)
    for i in range(nt):
        t = times[i]
        s_re = 0.0
        c_re = 0.0
        s_im = 0.0
        c_im = 0.0
        for n in range(weights.shape[0]):
            w = weights[n]
            if w == 0.0:
                continue
            ph = freqs[n] * t
            y = w * math.cos(ph) - c_re
            tmp = s_re + y
            c_re = (tmp - s_re) - y
            s_re = tmp
            y = w * math.sin(ph) - c_im
            tmp = s_im + y
            c_im = (tmp - s_im) - y
            s_im = tmp
        out[i] = complex(s_re, s_im)
    return out


def sector_sum_np(weights, freqs, times):
    times = np.asarray(times, dtype=float)
    s_re = np.zeros_like(times)
    s_im = np.zeros_like(times)
    c_re = np.zeros_like(times)
    c_im = np.zeros_like(times)
    for w, f in zip(weights, freqs):
        if w == 0.0:
            continue
        ph = f * times
        y = w * np.cos(ph) - c_re
        tmp = s_re + y
        c_re = (tmp - s_re) - y
        s_re = tmp
        y = w * np.sin(ph) - c_im
        tmp = s_im + y
        c_im = (tmp - s_im) - y
        s_im = tmp
    return s_re + 1j * s_im


if USE_NUMBA:
    apply_potential = apply_potential_nb
    weighted_density = weighted_density_nb
    norm_sq = norm_sq_nb
    sector_sum = sector_sum_nb
else:
    apply_potential = apply_potential_np
    weighted_density = weighted_density_np
    norm_sq = norm_sq_np
    sector_sum = sector_sum_np

BACKEND = "numba" if USE_NUMBA else "numpy"
