import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oschydro.grid import Grid, PhysicalConstants, ScalarField, VectorField, Wavefunction, integrate_values
from oschydro.schrodinger import (EMPotentialSpec, NodeError, PotentialSpec, SchemeError, energy,
                                  evolve_schrodinger, evolve_schrodinger_em, evolve_schrodinger_many,
                                  madelung_compose, madelung_decompose, madelung_decompose_series)
from oschydro.states import coherent_state, gaussian_packet, periodic_harmonic_ground_state


def _moments(g, rho):
    x = g.axis(0)
    m = integrate_values(g, rho * x) / integrate_values(g, rho)
    return m, integrate_values(g, rho * (x - m) ** 2) / integrate_values(g, rho)


@pytest.mark.parametrize("t", [0.5, 1.0, 2.0])
def test_free_packet_width_follows_closed_form(t):
    g = Grid(40.0, 512)
    psi = gaussian_packet(g, 1.0)
    out = evolve_schrodinger(psi, None, t / 200, 200)
    _, var = _moments(g, out.density)
    assert var == pytest.approx(1 + (t / 2) ** 2, rel=1e-8)


@given(p=st.floats(-2.0, 2.0), mass=st.floats(0.5, 3.0))
@settings(max_examples=15, deadline=None)
def test_packet_centre_moves_at_p_over_m(p, mass):
    g = Grid(40.0, 512)
    c = PhysicalConstants(mass=mass)
    psi = gaussian_packet(g, 1.0, momentum=[p], consts=c)
    out = evolve_schrodinger(psi, None, 0.01, 100, consts=c)
    mean, _ = _moments(g, out.density)
    assert mean == pytest.approx(p / mass, abs=1e-8)
    assert out.norm() == pytest.approx(1.0, abs=1e-12)


def test_periodic_harmonic_ground_state_is_stationary_with_half_quantum_energy():
    g = Grid(6.0, 128)
    U = PotentialSpec("periodic_harmonic", {"omega0": 1.0})
    psi = periodic_harmonic_ground_state(g, 1.0)
    assert energy(psi, U) == pytest.approx(0.5, abs=1e-10)
    out = evolve_schrodinger(psi, U, 1e-3, 2000)
    assert np.max(np.abs(out.density - psi.density)) / psi.density.max() < 1e-6


def test_coherent_state_centre_follows_classical_oscillator():
    g = Grid(20.0, 256)
    U = PotentialSpec("harmonic", {"omega0": 1.0})
    psi = coherent_state(g, 1.0, 1.5)
    for t in (1.0, 2.5):
        out = evolve_schrodinger(psi, U, t / 1000, 1000)
        mean, var = _moments(g, out.density)
        assert mean == pytest.approx(1.5 * np.cos(t), abs=1e-5)
        assert var == pytest.approx(0.5, abs=1e-5)


def test_implicit_difference_scheme_agrees_with_split_step():
    psi_p = gaussian_packet(Grid(30.0, 600), 1.0, momentum=[0.5])
    gd = Grid(30.0, 1201, "dirichlet")
    psi_d = gaussian_packet(gd, 1.0, momentum=[0.5])
    a = evolve_schrodinger(psi_p, None, 1e-3, 500)
    b = evolve_schrodinger(psi_d, None, 1e-3, 500, scheme="implicit-difference")
    ma, va = _moments(psi_p.grid, a.density)
    mb, vb = _moments(gd, b.density)
    assert mb == pytest.approx(ma, abs=1e-4) and vb == pytest.approx(va, rel=1e-3)
    with pytest.raises(SchemeError):
        evolve_schrodinger(psi_d, None, 1e-3, 1)


def test_uniform_vector_potential_shifts_velocity_by_minus_qA_over_mc():
    g = Grid(40.0, 512)
    psi = gaussian_packet(g, 1.0)
    out = evolve_schrodinger_em(psi, EMPotentialSpec(A=(0.7,)), 0.01, 100)
    mean, _ = _moments(g, out.density)
    assert mean == pytest.approx(-0.7, abs=1e-8)


def test_pure_gauge_vector_potential_leaves_density_unchanged():
    # A = d(chi)/dx with periodic chi: psi_A = psi_0 exp(i q chi / hbar c) exactly
    g = Grid(20.0, 128)
    x = g.axis(0)
    k = 2 * np.pi * 3 / 20.0
    chi = 0.4 * np.sin(k * x)
    A = VectorField(g, (0.4 * k * np.cos(k * x),))
    psi0 = gaussian_packet(g, 1.0, background=1e-3)
    psiA = Wavefunction(g, psi0.values * np.exp(1j * chi))
    free = evolve_schrodinger(psi0, None, 0.01, 50)
    gauged = evolve_schrodinger_em(psiA, EMPotentialSpec(A=A), 0.01, 50)
    assert np.max(np.abs(gauged.values - free.values * np.exp(1j * chi))) < 1e-9


def test_zero_vector_potential_defers_to_scalar_path_bit_for_bit():
    g = Grid(20.0, 128)
    psi = gaussian_packet(g, 1.0)
    phi = PotentialSpec("gaussian_well", {"depth": 1.0, "width": 2.0})
    a = evolve_schrodinger(psi, phi, 0.01, 20)
    b = evolve_schrodinger_em(psi, EMPotentialSpec(phi=phi, A=VectorField.zeros(g)), 0.01, 20)
    assert np.array_equal(a.values, b.values)


def test_separable_two_particle_evolution_is_a_product_of_single_particle_ones():
    g2 = Grid((16.0, 16.0), (64, 64))
    g1 = Grid(16.0, 64)
    x = g1.axis(0)
    f1 = np.exp(-(x + 1) ** 2 / 4) * np.exp(0.3j * x)
    f2 = np.exp(-(x - 1) ** 2 / 2)
    psi = Wavefunction(g2, np.outer(f1, f2)).normalized()
    out = evolve_schrodinger_many(psi, None, (1.0, 2.0), 0.01, 50)
    a = evolve_schrodinger(Wavefunction(g1, f1).normalized(), None, 0.01, 50)
    b = evolve_schrodinger(Wavefunction(g1, f2).normalized(), None, 0.01, 50,
                           consts=PhysicalConstants(mass=2.0))
    assert np.max(np.abs(out.density - np.outer(a.density, b.density))) < 1e-12


@given(p=st.floats(-3, 3), shift=st.floats(-2, 2))
@settings(max_examples=20, deadline=None)
def test_madelung_round_trip(p, shift):
    g = Grid(20.0, 256)
    psi = gaussian_packet(g, 1.0, center=[shift], momentum=[p], background=1e-3)
    rho, S = madelung_decompose(psi)
    assert np.allclose(madelung_compose(rho, S).values, psi.values, atol=1e-12)
    # away from the seam the unwrapped phase is linear with slope p
    inner = np.abs(g.axis(0) - shift) < 5
    assert np.allclose(np.diff(S.values[inner]) / g.spacing[0], p, atol=1e-8)


def test_madelung_rejects_densities_below_the_floor():
    g = Grid(20.0, 64)
    psi = Wavefunction(g, np.where(np.abs(g.axis(0)) < 2, 1.0, 0.0))
    with pytest.raises(NodeError):
        madelung_decompose(psi)


def test_series_decomposition_keeps_action_continuous_in_time():
    g = Grid(20.0, 256)
    psi = gaussian_packet(g, 1.0, momentum=[2.0])
    ts, frames = evolve_schrodinger(psi, None, 0.05, 40, record_every=1)
    rho, S = madelung_decompose_series(frames, rho_floor=1e-30)
    anchor = np.argmax(rho[0])
    assert np.max(np.abs(np.diff(S[:, anchor]))) < np.pi
