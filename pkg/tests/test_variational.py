import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from cavity_dw import variational as V
from cavity_dw.cavity import overlap_y, steady_state_photon_number
from cavity_dw.gpe import energy_functional, is_double_peaked
from cavity_dw.core import make_grid

from conftest import kappa_params

GRID = make_grid(2048, 16.0)


def test_single_gaussian_prefactor():
    for s in (0.4, 1.0, 1.7):
        psi = V.ansatz_density(s, 0.0, GRID)
        j = np.argmin(abs(GRID.x))
        c = 1 / (2 * math.pi**0.25 * math.sqrt(s))
        assert psi.values[j].real == pytest.approx(2 * c, rel=1e-10)
        assert V.normalization_constant(s, 0.0) == pytest.approx(c, rel=1e-14)


@settings(max_examples=40, deadline=None)
@given(sigma=st.floats(0.2, 2.5), x0=st.floats(0, 6))
def test_ansatz_normalized(sigma, x0):
    psi = V.ansatz_density(sigma, x0, GRID)
    assert abs(psi.norm() - 1) < 1e-10
    # the closed-form constant agrees with the discrete normalization
    j = np.argmin(abs(GRID.x - x0))
    expect = V.normalization_constant(sigma, x0) * (
        math.exp(-(GRID.x[j] + x0) ** 2 / (2 * sigma**2)) + math.exp(-(GRID.x[j] - x0) ** 2 / (2 * sigma**2)))
    assert psi.values[j].real == pytest.approx(expect, rel=1e-9)


def test_separated_peaks_carry_half_each():
    s = 0.6
    psi = V.ansatz_density(s, 5 * s, GRID)
    right = float(np.sum(psi.density[GRID.x > 0]) * GRID.dx + 0.5 * psi.density[GRID.x == 0].sum() * GRID.dx)
    assert right == pytest.approx(0.5, abs=1e-9)


def test_harmonic_variational_problem():
    p = kappa_params(eta=0.0)
    for s in (0.5, 1.0, 2.0):
        assert V.variational_energy(s, 0.0, p) == pytest.approx(0.25 * (1 / s**2 + s**2), rel=1e-14)
    pts = V.find_branches(p)
    assert len(pts) == 1
    assert pts[0].sigma == pytest.approx(1.0, abs=1e-5)
    assert pts[0].x0 == 0.0
    assert pts[0].energy == pytest.approx(0.5, abs=1e-12)
    assert pts[0].is_global and pts[0].branch == V.SINGLE_PEAK


@settings(max_examples=25, deadline=None)
@given(sigma=st.floats(0.3, 2.0), x0=st.floats(0, 4))
def test_closed_form_equals_grid_energy(sigma, x0):
    p = kappa_params(eta=0.0)
    assert V.variational_energy(sigma, x0, p) == pytest.approx(
        energy_functional(V.ansatz_density(sigma, x0, GRID), p), abs=1e-8)


@pytest.mark.parametrize("sigma,x0,eta,g", [(0.8, 1.1, 9.0, 0.0), (0.5, 2.2, 20.0, 0.05)])
def test_quadrature_mode(sigma, x0, eta, g):
    p = kappa_params(eta=eta, g_coll=g)
    assert V.variational_energy(sigma, x0, p, "quadrature", GRID) == pytest.approx(
        V.variational_energy(sigma, x0, p), abs=1e-8)


def test_overlap_root_five():
    for s in (0.5, 1.0, 2.0):
        p = kappa_params(delta_x=s / 2)
        assert V.ansatz_overlap(s, 0.0, p) == pytest.approx(p.u0 / math.sqrt(5), rel=1e-14)


def test_offset_overlap_matches_grid():
    p = kappa_params(barrier_offset=0.4)
    for s, x0 in ((0.7, 0.0), (0.6, 1.5)):
        assert V.ansatz_overlap(s, x0, p) == pytest.approx(overlap_y(V.ansatz_density(s, x0, GRID), p),
                                                           rel=1e-10)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(11)
    p = kappa_params(eta=10.0, g_coll=0.01)
    h = 1e-5
    for _ in range(20):
        s, x = rng.uniform(0.3, 2.0), rng.uniform(0.1, 3.0)
        grad = V.energy_gradient(s, x, p)
        fd = np.array([(V.variational_energy(s + h, x, p) - V.variational_energy(s - h, x, p)) / (2 * h),
                       (V.variational_energy(s, x + h, p) - V.variational_energy(s, x - h, p)) / (2 * h)])
        scale = max(1.0, float(np.max(abs(grad))))
        assert np.allclose(grad, fd, rtol=1e-5, atol=1e-5 * scale)


def test_bistable_window(fig3):
    pts = V.find_branches(fig3.replace(eta=10 * 500.0))
    assert len(pts) == 2
    upper, lower = sorted(pts, key=lambda b: -b.n_ss)
    assert upper.is_global and not lower.is_global
    assert upper.branch == V.DOUBLE_PEAK and lower.branch == V.SINGLE_PEAK
    assert upper.n_ss > 100 * lower.n_ss


@pytest.mark.parametrize("eta", [1.0, 5.0, 20.0, 40.0])
def test_resonant_coupling_has_one_branch(eta):
    p = kappa_params(u0=math.sqrt(5) / 1e4, eta=eta)
    assert len(V.find_branches(p)) == 1


@pytest.mark.parametrize("eta", [0.0, 5.0, 10.0, 17.0])
def test_branches_are_local_minima(fig3, eta):
    p = fig3.replace(eta=eta * 500.0)
    for b in V.find_branches(p):
        eig = np.linalg.eigvalsh(V.hessian(b.sigma, b.x0, p))
        if eta == 0.0:
            assert eig[0] > -1e-6  # flat in x0 at the harmonic point
        else:
            assert eig[0] > 0


def test_branch_n_ss_self_consistent(fig3):
    p = fig3.replace(eta=10 * 500.0)
    grid = make_grid()
    for b in V.find_branches(p, grid=grid):
        psi = V.ansatz_density(b.sigma, b.x0, grid)
        assert b.n_ss == steady_state_photon_number(overlap_y(psi, p), p)


@settings(max_examples=40, deadline=None)
@given(sigma=st.floats(0.3, 2.0), x0=st.floats(0, 3), e1=st.floats(0, 30), e2=st.floats(0, 30))
def test_monotone_in_pump(sigma, x0, e1, e2):
    assume(abs(e1 - e2) > 1e-3)
    p = kappa_params()
    lo, hi = sorted((e1, e2))
    diff = V.variational_energy(sigma, x0, p.replace(eta=hi * 500)) - V.variational_energy(
        sigma, x0, p.replace(eta=lo * 500))
    arg = p.delta_c - p.n_atoms * V.ansatz_overlap(sigma, x0, p)
    assume(abs(arg) > 1e-6)
    assert np.sign(diff) == -np.sign(arg)


@settings(max_examples=40, deadline=None)
@given(sigma=st.floats(0.3, 2.0), ratio=st.floats(0, 3))
def test_branch_label_matches_density_shape(sigma, ratio):
    assume(abs(ratio - 1) > 0.02)
    psi = V.ansatz_density(sigma, ratio * sigma, GRID)
    assert (V.branch_label(sigma, ratio * sigma) == V.DOUBLE_PEAK) == is_double_peaked(psi)


def test_small_pump_limit(fig3):
    p = fig3.replace(eta=0.01 * 500)
    (b,) = V.find_branches(p)
    y = p.u0 / math.sqrt(1 + 1 / p.delta_x**2)
    assert b.n_ss == pytest.approx(p.eta**2 / (p.kappa**2 + (p.delta_c - p.n_atoms * y) ** 2), rel=1e-4)


def test_sweep_validation_and_failures(fig3):
    with pytest.raises(ValueError):
        V.sweep_pump(fig3, [])
    with pytest.raises(ValueError):
        V.sweep_pump(fig3, [2.0, 1.0])
    res = V.sweep_pump(fig3, [500.0, 1000.0], with_gpe=False)
    assert res.failures == []
    assert len(res.rows) == 2 and all(r.global_branch for r in res.rows)


def test_sweep_gpe_column(fig3):
    res = V.sweep_pump(fig3, [1000.0, 10 * 500.0])
    lo, hi = res.rows
    assert not lo.gpe_double_peak and hi.gpe_double_peak
    assert hi.n_ss_gpe == pytest.approx(hi.global_branch.n_ss, rel=0.1)


def test_seed_grid_names(fig3):
    with pytest.raises(ValueError):
        V.find_branches(fig3, seed_grid="medium")
    fine = V.find_branches(fig3.replace(eta=10 * 500.0), seed_grid="fine")
    assert len(fine) == 2
