import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oschydro.grid import Grid, PhysicalConstants, ScalarField
from oschydro.quantum_potential import (FloorViolation, decomposition_residual, effective_potential,
                                        log_gradient_force, ponderomotive_potential, potential_set,
                                        quantum_potential, quantum_potential_expanded, quantum_potential_parts,
                                        wave_ponderomotive_force)


def _gaussian(g, s=1.0):
    x = g.axis(0)
    return ScalarField(g, np.exp(-x ** 2 / (2 * s * s)) / np.sqrt(2 * np.pi * s * s))


@given(s=st.floats(0.7, 1.5), hbar=st.floats(0.5, 2.0), m=st.floats(0.5, 2.0))
@settings(max_examples=25, deadline=None)
def test_gaussian_quantum_potential_matches_closed_form(s, hbar, m):
    # sqrt(rho) ~ exp(-x^2/4s^2): U_q = hbar^2/(4 m s^2) (1 - x^2/(2 s^2))
    g = Grid(12.0 * s, 257, "dirichlet")
    x = g.axis(0)
    c = PhysicalConstants(hbar=hbar, mass=m)
    rho = _gaussian(g, s)
    uq = quantum_potential(rho, c, rho_floor=0.0).values
    prime, dprime = quantum_potential_parts(rho, c, rho_floor=0.0)
    core = np.abs(x) < 3 * s
    scale = hbar ** 2 / (4 * m * s * s)
    assert np.allclose(uq[core], scale * (1 - x[core] ** 2 / (2 * s * s)), atol=1e-6 * scale)
    assert np.allclose(prime.values, hbar ** 2 / (8 * m) * x ** 2 / s ** 4, atol=1e-9 * scale)
    assert np.allclose(dprime.values[core], hbar ** 2 / (4 * m * s * s) * (1 - x[core] ** 2 / s ** 2),
                       atol=1e-6 * scale)


def test_expanded_form_agrees_with_root_form():
    g = Grid(20.0, 512)
    x = g.axis(0)
    rho = ScalarField(g, np.exp(-(x - 1) ** 2) + 0.5 * np.exp(-(x + 2) ** 2 / 3) + 1e-3)
    a = quantum_potential(rho).values
    b = quantum_potential_expanded(rho).values
    assert np.max(np.abs(a - b)) < 1e-8 * np.max(np.abs(a))


def test_decomposition_residual_converges_at_fourth_order_on_a_bounded_grid():
    res = [decomposition_residual(_gaussian(Grid(6.0, n + 1, "dirichlet")), rho_floor=0.0) for n in (64, 128, 256)]
    assert res[0] / res[1] > 12 and res[1] / res[2] > 12


@given(omega=st.floats(1.0, 1e4), hbar=st.floats(0.1, 3.0), m=st.floats(0.2, 5.0),
       c1=st.floats(-3, 3), w=st.floats(0.5, 2.0))
@settings(max_examples=40, deadline=None)
def test_ponderomotive_potential_of_log_gradient_force_is_U_prime(omega, hbar, m, c1, w):
    g = Grid(20.0, 128)
    x = g.axis(0)
    c = PhysicalConstants(hbar=hbar, mass=m)
    rho = ScalarField(g, np.exp(-(x - c1) ** 2 / (2 * w * w)) + 1e-3)
    pond = ponderomotive_potential(log_gradient_force(rho, omega, c), c).values
    up = quantum_potential_parts(rho, c)[0].values
    assert np.max(np.abs(pond - up)) <= 1e-10 * np.max(np.abs(up))


def test_standing_wave_ponderomotive_potential():
    g = Grid(2 * np.pi, 64)
    x = g.axis(0)
    f = wave_ponderomotive_force(g, 2.0, 1.0, 10.0, PhysicalConstants(mass=2.0, charge=3.0))
    expected = (3.0 * 2.0 * np.cos(x)) ** 2 / (4 * 2.0 * 100.0)
    assert np.allclose(ponderomotive_potential(f, PhysicalConstants(mass=2.0)).values, expected, rtol=1e-14)


def test_effective_potential_variants():
    g = Grid(20.0, 256)
    rho = ScalarField(g, np.exp(-g.axis(0) ** 2 / 2) + 1e-3)
    U = ScalarField(g, 0.1 * g.axis(0) ** 2)
    qs = potential_set(U, rho)
    assert np.allclose(qs.U_ef_schrodinger.values, U.values + qs.U_q.values)
    assert np.allclose(qs.U_ef_variational.values, U.values + qs.U_q_prime.values)
    t = effective_potential(U, rho, "true_oscillating", t=0.0, omega=50.0)
    assert np.allclose(t.values, U.values - 50.0 / np.sqrt(2) * np.log(rho.values))
    with pytest.raises(ValueError):
        effective_potential(U, rho, "true_oscillating")


def test_floor_violation_is_reported():
    g = Grid(20.0, 64)
    with pytest.raises(FloorViolation):
        quantum_potential(ScalarField(g, np.where(np.abs(g.axis(0)) < 3, 1.0, 0.0)))
