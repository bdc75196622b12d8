import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oschydro.grid import Grid, PhysicalConstants, ScalarField, VectorField, integrate_values
from oschydro.hydro import (HydroState, OscillationConfig, PressureLaw, hj_step, hj_step_many, relative_l2, run,
                            seed_fast_components, write_run_outputs)
from oschydro.schrodinger import EMPotentialSpec, evolve_schrodinger
from oschydro.states import gaussian_density, gaussian_packet


def test_oscillation_config_validation():
    with pytest.raises(ValueError):
        OscillationConfig(-1.0)
    with pytest.raises(ValueError):
        OscillationConfig(100.0, substeps_per_period=8)
    osc = OscillationConfig(100.0)
    assert osc.dt == pytest.approx(2 * np.pi / 100 / 32)
    assert osc.periods_in(1.0) == 16


@given(t0=st.floats(0, 1), omega=st.floats(10, 1000))
@settings(max_examples=20, deadline=None)
def test_seeded_fast_components_have_closed_form(t0, omega):
    g = Grid(10.0, 257, "dirichlet")
    x = g.axis(0)
    rho = ScalarField(g, np.exp(-x ** 2 / 2))
    sigma, zeta = seed_fast_components(rho, t0, OscillationConfig(omega))
    assert np.allclose(sigma.values, np.sin(omega * t0) / np.sqrt(2) * (-x ** 2 / 2))
    core = slice(40, -40)
    expected = np.cos(omega * t0) / (np.sqrt(2) * omega) * (x ** 2 - 1) * rho.values
    assert np.allclose(zeta.values[core], expected[core], atol=1e-6 / omega)


def test_pressure_law_alternates_sign():
    law = PressureLaw(1.0, 10.0)
    assert law.pressure(1.0, 0.0) < 0 < law.pressure(1.0, np.pi / 10)
    assert law.temperature(0.0) == pytest.approx(-10 / np.sqrt(2))


def test_mass_is_conserved_and_averaged_width_follows_free_spreading():
    g = Grid(20.0, 256)
    psi = gaussian_packet(g, background=1e-3)
    res = run(psi, OscillationConfig(400.0), 1.0)
    assert np.allclose(res.diagnostics["mass"], 1.0, atol=1e-12)
    x = g.axis(0)
    base = psi.density.min()
    for tc, avg in list(zip(res.window_centers, res.averaged_rho))[::16]:
        r = avg - base
        w2 = integrate_values(g, r * x * x) / integrate_values(g, r)
        assert w2 == pytest.approx(1 + (tc / 2) ** 2, rel=2.5e-3)


def test_averaged_density_approaches_reference_as_omega_grows():
    g = Grid(20.0, 256)
    psi = gaussian_packet(g, background=1e-3)
    errs = []
    for w in (100.0, 200.0):
        res = run(psi, OscillationConfig(w), 0.5)
        tc = res.window_centers[-1]
        ref = evolve_schrodinger(psi, None, tc / 500, 500)
        errs.append(relative_l2(res.averaged_rho[-1], ref.density))
    assert errs[1] < errs[0] < 0.01


def test_zero_vector_potential_reproduces_scalar_pipeline_bitwise():
    g = Grid(20.0, 128)
    psi = gaussian_packet(g, background=1e-3)
    osc = OscillationConfig(200.0)
    a = run(psi, osc, 0.1)
    b = run(psi, osc, 0.1, em=EMPotentialSpec(A=VectorField.zeros(g)))
    assert all(np.array_equal(p, q) for p, q in zip(a.averaged_rho, b.averaged_rho))


@given(a0=st.floats(-1.5, 1.5).filter(lambda a: abs(a) > 1e-3))
@settings(max_examples=8, deadline=None)
def test_uniform_density_with_constant_A_flows_uniformly(a0):
    g = Grid(10.0, 64)
    uni = ScalarField(g, np.full(g.shape, 0.1))
    res = run((uni, 0.0), OscillationConfig(100.0), 0.3, em=EMPotentialSpec(A=(a0,)))
    st_ = res.final_state
    v = st_.velocity(A=(np.full(g.shape, a0),)).components[0]
    assert np.allclose(v, -a0, atol=1e-12)
    assert np.allclose(st_.S_r.values, -0.5 * a0 * a0 * st_.t, rtol=1e-12)


def test_two_axis_equal_mass_flow_stays_irrotational():
    g = Grid((12.0, 12.0), (48, 48))
    rho = ScalarField(g, gaussian_density(g, (1.0, 1.3), (0.5, -0.5), background=1e-3))
    res = run((rho, 0.0), OscillationConfig(100.0), 0.2)
    assert max(res.diagnostics["curl"]) < 1e-10


def test_single_steps_match_between_entry_points():
    g = Grid((12.0, 12.0), (32, 32))
    rho = ScalarField(g, gaussian_density(g, 1.0, background=1e-3))
    st0 = HydroState(rho, ScalarField(g, np.zeros(g.shape)))
    osc = OscillationConfig(100.0)
    a = hj_step(st0, None, osc, osc.dt, PhysicalConstants(mass=(1.0, 2.0)))
    b = hj_step_many(st0, None, (1.0, 2.0), osc, osc.dt)
    assert np.array_equal(a.rho_r.values, b.rho_r.values)
    with pytest.raises(ValueError):
        hj_step(st0, None, osc, 2 * osc.dt)


def test_run_outputs_are_written_with_manifest(tmp_path):
    g = Grid(10.0, 64)
    res = run(gaussian_packet(g, background=1e-3), OscillationConfig(100.0), 0.2)
    path = write_run_outputs(res, tmp_path)
    m = json.loads(path.read_text())
    assert len(m["snapshots"]) == len(res.window_centers) == m["periods"]
    assert (tmp_path / m["snapshots"][0]["file"]).is_file()
