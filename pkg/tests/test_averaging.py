import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oschydro.averaging import (AlignmentError, analytic_fast_components, cycle_average, decompose,
                                recovered_slow_residual, relative_rms, scale_estimates, verify_identities,
                                window_weights)
from oschydro.grid import Grid


@given(amp=st.floats(-5, 5), phase=st.floats(0, 2 * np.pi), harmonic=st.integers(1, 5),
       offset=st.floats(-5, 5), K=st.sampled_from([16, 32, 64]))
@settings(max_examples=40, deadline=None)
def test_cycle_average_removes_harmonics_and_keeps_constants(amp, phase, harmonic, offset, K):
    omega = 7.0
    t = np.arange(3 * K + 1) * 2 * np.pi / omega / K
    y = offset + amp * np.cos(harmonic * omega * t + phase)
    tc, avg = cycle_average(y, t, omega)
    assert np.allclose(avg, offset, atol=1e-12 * (1 + abs(amp) + abs(offset)))


def test_cycle_average_of_linear_trend_is_the_centre_value():
    omega, K = 3.0, 32
    t = np.arange(2 * K + 1) * 2 * np.pi / omega / K
    tc, avg = cycle_average(2.0 * t + 1.0, t, omega)
    assert np.allclose(avg, 2.0 * tc + 1.0)
    assert window_weights(4).sum() == pytest.approx(1.0)


def test_decompose_recovers_slow_and_fast_parts_of_a_synthetic_series():
    g = Grid(10.0, 32)
    x = g.axis(0)
    omega, K = 40.0, 32
    t = np.arange(4 * K + 1) * 2 * np.pi / omega / K
    slow = np.exp(-x ** 2)[None] * (1 + 0.01 * t[:, None])
    fast = 0.1 * np.cos(omega * t)[:, None] * np.sin(x)[None]
    d = decompose(t, slow + fast, fast, omega)
    assert relative_rms(d.fast_zeta, (fast)[K // 2:K // 2 + len(d.fast_zeta)]) < 1e-10


def test_misaligned_window_is_rejected():
    t = np.linspace(0, 1.0, 11)
    with pytest.raises(AlignmentError):
        verify_identities(np.zeros((11, 16)), np.zeros((11, 16)), np.ones(16), 1.0, t, Grid(1.0, 16))


@given(omega=st.floats(10, 1000), hbar=st.floats(0.3, 2.0))
@settings(max_examples=15, deadline=None)
def test_identities_hold_for_closed_form_components(omega, hbar):
    from oschydro.grid import PhysicalConstants
    g = Grid(10.0, 513, "dirichlet")
    x = g.axis(0)
    rho = np.exp(-x ** 2 / 2) / np.sqrt(2 * np.pi)
    c = PhysicalConstants(hbar=hbar)
    K = 32
    t = 0.3 + np.arange(K + 1) * 2 * np.pi / omega / K
    s, z = analytic_fast_components(rho, t, omega, g, c)
    rep = verify_identities(s, z, rho, omega, t, g, c)
    assert rep.passed, rep.as_dict()


def test_closed_form_amplitudes():
    g = Grid(10.0, 129, "dirichlet")
    x = g.axis(0)
    rho = np.exp(-x ** 2 / 2)
    s, z = analytic_fast_components(rho, np.array([np.pi / 2 / 5.0, 0.0]), 5.0, g)
    assert np.allclose(s[0], np.log(rho) / np.sqrt(2))
    assert np.allclose(z[1][20:-20], (x ** 2 - 1)[20:-20] * rho[20:-20] / (np.sqrt(2) * 5.0), atol=1e-6)


def test_slow_residual_vanishes_on_schrodinger_history():
    from oschydro.schrodinger import evolve_schrodinger, madelung_decompose_series
    from oschydro.states import gaussian_packet
    g = Grid(16.0, 256)
    psi = gaussian_packet(g, 1.0, background=1e-4)
    ts, frames = evolve_schrodinger(psi, None, 0.005, 40, record_every=1)
    rho, S = madelung_decompose_series(frames)
    tt, hj, cont = recovered_slow_residual(rho, S, ts, None, g)
    w = rho[1:-1] / rho.max()
    assert np.sqrt(np.sum(w * hj ** 2) / np.sum(w)) < 1e-3


def test_scale_estimates_of_a_moving_packet():
    g = Grid(20.0, 257, "dirichlet")
    x = g.axis(0)
    est = scale_estimates(np.exp(-x ** 2 / 2), 2.0 * x, g, omega=100.0)
    assert est.V == pytest.approx(2.0, rel=1e-6)
    assert est.L == pytest.approx(1.0, rel=1e-6)
    assert est.T == pytest.approx(0.5, rel=1e-6)
