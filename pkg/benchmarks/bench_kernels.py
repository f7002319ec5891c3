"""Compare the numba and numpy kernel flavours.

    python3 benchmarks/bench_kernels.py [--repeat 200]

Prints microseconds per call for each kernel at a few grid sizes, plus the
cost of one full split step with whichever backend is active
(CAVITY_DW_NUMBA=0 selects numpy).
"""
import argparse
import timeit

import numpy as np

from cavity_dw import gpe, kernels
from cavity_dw.core import ModelParams, gaussian, make_grid


def _time(fn, repeat):
    fn()  # warm-up / compile
    return min(timeit.repeat(fn, number=1, repeat=repeat)) * 1e6


def bench(n, repeat):
    rng = np.random.default_rng(0)
    psi = rng.normal(size=n) + 1j * rng.normal(size=n)
    base = rng.random(n)
    shape = rng.random(n)
    rows = []
    for name in ("apply_potential", "weighted_density", "norm_sq"):
        nb = getattr(kernels, name + "_nb")
        npy = getattr(kernels, name + "_np")
        if name == "apply_potential":
            a = psi.copy()
            f_nb = lambda: nb(a, base, shape, 3.0, 0.0, 5e-4, False)
            f_np = lambda: npy(a, base, shape, 3.0, 0.0, 5e-4, False)
        elif name == "weighted_density":
            f_nb = lambda: nb(psi, shape)
            f_np = lambda: npy(psi, shape)
        else:
            f_nb = lambda: nb(psi)
            f_np = lambda: npy(psi)
        rows.append((name, n, _time(f_nb, repeat), _time(f_np, repeat)))
    return rows


def bench_sector(repeat):
    w = np.random.default_rng(1).random(200)
    f = np.linspace(-1e-3, -2e-3, 200)
    t = np.linspace(0, 4e7, 4001)
    return ("sector_sum", "200x4001",
            _time(lambda: kernels.sector_sum_nb(w, f, t), max(3, repeat // 20)),
            _time(lambda: kernels.sector_sum_np(w, f, t), max(3, repeat // 20)))


def bench_step(repeat):
    g = make_grid(1024, 12.0)
    p = ModelParams.from_kappa_units(500, delta_c=1, u0=0.005, eta=25, delta_x=0.5)
    prop = gpe.Propagator(g, p, 5e-4)
    psi = np.array(gaussian(g, 2.0, 0.8).values)
    return _time(lambda: prop.step(psi), repeat)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args()
    print(f"{'kernel':<18}{'size':>10}{'numba us':>12}{'numpy us':>12}{'speedup':>9}")
    rows = []
    for n in (1024, 4096, 32768):
        rows += bench(n, args.repeat)
    rows.append(bench_sector(args.repeat))
    for name, n, t_nb, t_np in rows:
        print(f"{name:<18}{str(n):>10}{t_nb:12.1f}{t_np:12.1f}{t_np / t_nb:9.2f}")
    print(f"full split step (1024 points, backend={kernels.BACKEND}): {bench_step(args.repeat):.1f} us")


if __name__ == "__main__":
    main()
