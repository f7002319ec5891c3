import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import erfc

from cavity_dw import gpe
from cavity_dw.core import (ConvergenceError, NumericalError, OrderParameter, gaussian, make_grid,
                            normalize)
from cavity_dw.variational import ansatz_density, variational_energy

from conftest import kappa_params


def test_real_step_is_unitary(grid, fig4):
    psi = gaussian(grid, 1.3, 0.6)
    out = gpe.step(psi, 5e-4, fig4, "real")
    assert abs(out.norm() - 1) < 1e-12


def test_step_rejects_bad_input(grid, fig4):
    with pytest.raises(ValueError):
        gpe.step(OrderParameter(2 * gaussian(grid).values, grid), 1e-3, fig4)
    with pytest.raises(ValueError):
        gpe.step(gaussian(grid), 1e-3, fig4, "sideways")
    with pytest.raises(ValueError):
        gpe.step(gaussian(grid), 0.0, fig4)


def test_coherent_state_oscillates(grid):
    p = kappa_params(eta=0.0)
    psi = normalize(OrderParameter(np.exp(-(grid.x - 1) ** 2 / 2), grid))
    dt = 1e-3
    n = int(round(2 * math.pi / dt))
    worst = 0.0
    for i in range(1, n + 1):
        psi = gpe.step(psi, dt, p)
        if i % 50 == 0 or i == n:
            center = float(np.sum(grid.x * psi.density) * grid.dx)
            worst = max(worst, abs(center - math.cos(i * dt)))
    assert worst < 1e-3


def test_frozen_field_keeps_ground_state_stationary(grid):
    p = kappa_params(eta=2.0)
    gs = gpe.ground_state_imaginary_time(p, grid, tol=1e-12, dtau=2.5e-4)
    prop = gpe.Propagator(grid, p, 1e-4)
    psi = np.array(gs.psi.values)
    ref = abs(psi)
    worst = 0.0
    for i in range(1, 100_001):
        psi, _ = prop.step(psi, frozen_n_ss=gs.n_ss)
        if i % 1000 == 0:
            worst = max(worst, float(np.max(abs(abs(psi) - ref))))
    assert worst < 1e-6


def test_harmonic_ground_state(grid):
    gs = gpe.ground_state_imaginary_time(kappa_params(eta=0.0), grid)
    assert abs(gs.energy - 0.5) < 1e-6
    exact = math.pi**-0.25 * np.exp(-grid.x**2 / 2)
    assert np.max(abs(abs(gs.psi.values) - exact)) < 1e-6
    assert gs.residual < math.sqrt(1e-9)


def test_fig3_low_pump_single_peak(grid, fig3):
    gs = gpe.ground_state_imaginary_time(fig3.replace(eta=500.0), grid)
    rho = gs.psi.density
    assert grid.x[np.argmax(rho)] == pytest.approx(0.0, abs=grid.dx)
    assert not gpe.is_double_peaked(gs.psi)


def test_fig3_high_pump_double_peak(grid, fig3):
    gs = gpe.ground_state_imaginary_time(fig3.replace(eta=20 * 500.0), grid)
    assert gpe.is_double_peaked(gs.psi)
    j = np.argmin(abs(grid.x))
    assert gs.psi.density[j] < 1e-3 * gs.psi.density.max()


def test_ground_state_even_parity(grid, fig3):
    gs = gpe.ground_state_imaginary_time(fig3.replace(eta=10 * 500.0), grid,
                                         init=gaussian(grid, 1.5, 0.5))
    v = gs.psi.values
    assert np.max(abs(v - grid.mirror(v))) < 1e-6


def test_iteration_cap_reports_last_state(grid, fig3):
    with pytest.raises(ConvergenceError) as exc:
        gpe.ground_state_imaginary_time(fig3.replace(eta=5000.0), grid, max_steps=100)
    assert exc.value.last is not None
    assert exc.value.last.psi.is_normalized()


def test_energy_functional_harmonic(grid):
    psi = OrderParameter(math.pi**-0.25 * np.exp(-grid.x**2 / 2), grid)
    assert gpe.energy_functional(psi, kappa_params(eta=0.0)) == pytest.approx(0.5, abs=1e-12)


def test_energy_arctan_term_at_zero_overlap(grid):
    p = kappa_params(eta=7.0, u0=0.0)
    psi = gaussian(grid)
    shift = gpe.energy_functional(psi, p) - gpe.energy_functional(psi, p.replace(eta=0.0))
    assert shift == pytest.approx(-(p.eta**2) / (p.kappa * p.n_atoms) * math.atan(p.delta_c / p.kappa),
                                  rel=1e-12)


@pytest.mark.parametrize("sigma,x0,eta,g", [(0.7, 0.0, 5.0, 0.0), (0.55, 1.8, 12.0, 0.0),
                                            (1.2, 0.9, 3.0, 0.02)])
def test_energy_matches_variational_closed_form(sigma, x0, eta, g):
    grid = make_grid(2048, 16.0)
    p = kappa_params(eta=eta, g_coll=g)
    psi = ansatz_density(sigma, x0, grid)
    assert gpe.energy_functional(psi, p) == pytest.approx(variational_energy(sigma, x0, p), abs=1e-6)


def test_inversion_even_state_is_zero(grid, fig3):
    psi = gaussian(grid, 0.0, 0.9)
    assert abs(gpe.inversion(psi, fig3)) < 1e-10


def test_inversion_right_localized(grid, fig3):
    psi = gaussian(grid, 3.0, 0.5)
    # density is a Gaussian of standard deviation 0.5/sqrt(2); mass left of 0 is a normal tail
    tail = 0.5 * erfc(3.0 / 0.5)
    assert gpe.inversion(psi, fig3) == pytest.approx(1 - 2 * tail, abs=1e-8)


@settings(max_examples=40, deadline=None)
@given(c1=st.floats(-5, 5), c2=st.floats(-5, 5), w=st.floats(0.3, 2.0), phase=st.floats(0, 6.3),
       a=st.floats(0.1, 1.0))
def test_mirror_flips_inversion(c1, c2, w, phase, a):
    grid = make_grid(512, 12.0)
    p = kappa_params()
    raw = np.exp(-(grid.x - c1) ** 2 / (2 * w**2)) + a * np.exp(1j * phase) * np.exp(-(grid.x - c2) ** 2)
    psi = normalize(OrderParameter(raw, grid))
    z = gpe.inversion(psi, p)
    assert -1 <= z <= 1
    assert gpe.inversion(psi.mirrored(), p) == pytest.approx(-z, abs=1e-14)


# a displaced Gaussian under the fig4 pump sheds a small fast fraction; give it room
WIDE = make_grid(4096, 64.0)
MID = make_grid(2048, 24.0)


def test_evolve_record_invariants(fig4):
    res = gpe.evolve(gaussian(WIDE, 2.0, 0.8), 2.0, 5e-4, fig4, snapshot_every=0.5)
    assert np.all(np.diff(res.times) > 0)
    assert np.all(abs(res.inversion) <= 1)
    assert np.all((res.photon_number >= 0) & (res.photon_number <= fig4.max_photons))
    assert [t for t, _ in res.snapshots] == pytest.approx([0, 0.5, 1.0, 1.5, 2.0])
    assert all(psi.is_normalized() for _, psi in res.snapshots)


def test_norm_conservation(fig4):
    res = gpe.evolve(gaussian(WIDE, 2.0, 0.8), 5.0, 5e-4, fig4)  # 1e4 steps
    assert res.steps == 10_000
    assert res.norm_error < 1e-10


def test_parity_conservation(grid, fig3):
    p = fig3.replace(eta=8 * 500.0)
    res = gpe.evolve(gaussian(grid, 0.0, 0.7), 5.0, 5e-4, p)
    assert np.max(abs(res.inversion)) < 1e-6


def _z_final(dt, p, grid, t_final):
    return gpe.evolve(gaussian(grid, 1.5, 0.7), t_final, dt, p, record_every=t_final).inversion[-1]


def test_strang_second_order():
    p = kappa_params(u0=0.005, eta=6.0)
    dt = 4e-3
    ref = _z_final(dt / 8, p, MID, 2.0)
    e1 = abs(_z_final(dt, p, MID, 2.0) - ref)
    e2 = abs(_z_final(dt / 2, p, MID, 2.0) - ref)
    assert e1 / e2 == pytest.approx(4.0, abs=0.5)


def test_scaling_invariance():
    p = kappa_params(u0=0.005, eta=6.0)
    q = p.scaled(2.0)
    a = gpe.evolve(gaussian(MID, 1.5, 0.7), 2.0, 5e-4, p)
    b = gpe.evolve(gaussian(MID, 1.5, 0.7), 2.0, 5e-4, q)
    assert np.max(abs(a.inversion - b.inversion)) < 1e-8
    assert b.photon_number == pytest.approx(2 * a.photon_number, rel=1e-10)


def test_imaginary_time_energy_descends(grid, fig3):
    p = fig3.replace(eta=6 * 500.0)
    prop = gpe.Propagator(grid, p, gpe.DEFAULT_DTAU, imaginary=True)
    psi = np.array(gaussian(grid, 1.0, 1.0).values)
    energies = []
    for i in range(2000):
        psi, _ = prop.step(psi)
        energies.append(prop.energy(psi))
    assert np.all(np.diff(energies[100:]) <= 1e-12)


def test_schedule_drives_eta(grid, fig3):
    sched = [(0.0, 500.0), (1.0, 1500.0)]
    res = gpe.evolve(gaussian(grid), 1.5, 5e-4, fig3, schedule=sched, record_every=0.25)
    assert res.eta == pytest.approx([500, 750, 1000, 1250, 1500, 1500, 1500])
    with pytest.raises(ValueError):
        gpe.evolve(gaussian(grid), 1.0, 1e-3, fig3, schedule=[(1.0, 1.0), (0.5, 2.0)])


def test_boundary_leak_is_reported_with_partial_record(grid):
    p = kappa_params(u0=0.005, eta=100.0)
    with pytest.raises(NumericalError) as exc:
        gpe.evolve(gaussian(grid, 2.0, 0.8), 1.0, 5e-4, p)
    part = exc.value.partial
    assert part is not None and len(part.times) >= 1
    assert "boundary" in str(exc.value)


def test_localized_modes(fig4):
    grid = make_grid()
    psi_l, psi_r = gpe.localized_modes(fig4, grid)
    assert abs(psi_l.norm() - 1) < 1e-8 and abs(psi_r.norm() - 1) < 1e-8
    assert abs(np.vdot(psi_l.values, psi_r.values) * grid.dx) < 1e-8
    assert gpe.inversion(psi_r, fig4) > 0.9
    assert gpe.inversion(psi_l, fig4) < -0.9
    sym, _ = gpe.symmetric_pair(fig4, grid)
    rebuilt = (psi_l.values + psi_r.values) / math.sqrt(2)
    phase = np.vdot(rebuilt, sym.psi.values)
    assert np.max(abs(rebuilt * phase / abs(phase) - sym.psi.values)) < 1e-12


def test_odd_projection_needs_symmetric_well(grid, fig4):
    with pytest.raises(ValueError):
        gpe.ground_state_imaginary_time(fig4.replace(barrier_offset=0.3), grid, odd=True)
