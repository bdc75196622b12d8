import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oschydro.grid import Grid, VectorField
from oschydro.quantum_potential import OscillatingForceSpec
from oschydro.trajectories import (EscapeError, ResolutionError, kinematic_trajectory, newton_effective,
                                   newton_true, oscillation_amplitude, read_trajectory_csv,
                                   write_trajectory_csv)

GRID = Grid(20.0, 401, "dirichlet")
X = GRID.axis(0)


@given(n=st.integers(-3, 3), x0=st.floats(-2, 2))
@settings(max_examples=10, deadline=None)
def test_plane_wave_guidance_moves_at_constant_speed(n, x0):
    k = 2 * np.pi * n / 20
    s = kinematic_trajectory(k * X, GRID, [x0], 0.01, 2.0)
    assert s.positions[-1, 0] == pytest.approx(x0 + 2 * k, abs=1e-9)


def _upward_crossings(t, x):
    i = np.where((x[:-1] > 0) & (x[1:] <= 0))[0]
    return t[i] + x[i] / (x[i] - x[i + 1]) * (t[i + 1] - t[i])


def test_harmonic_period_and_energy():
    s = newton_effective(0.5 * X ** 2, GRID, [2.0], [0.0], 0.01, 20.0)
    periods = np.diff(_upward_crossings(s.times, s.positions[:, 0]))
    assert np.allclose(periods, 2 * np.pi, atol=1e-3)
    E = 0.5 * s.velocities[:, 0] ** 2 + 0.5 * s.positions[:, 0] ** 2
    assert np.max(np.abs(E - E[0])) / E[0] < 1e-4


def test_oscillating_force_averages_to_effective_dynamics():
    # ln rho = -x^2/2 gives an effective harmonic potential x^2/8
    T = 4 * np.pi
    errs = []
    for wT in (100, 200, 400):
        w = wT / T
        dt = 2 * np.pi / w / 32
        P = int(round(T * w / (2 * np.pi)))
        dur = P * 2 * np.pi / w
        tr = newton_true(None, -X ** 2 / 2, w, GRID, [1.0], [0.0], dt, dur)
        ef = newton_effective(X ** 2 / 8, GRID, [1.0], [0.0], dt, dur)
        tc, avg = tr.cycle_averaged(w)
        idx = np.round(tc / dt).astype(int)
        errs.append(np.max(np.abs(avg[:, 0] - ef.positions[idx, 0])))
    assert errs[1] < 0.05
    for a, b in zip(errs, errs[1:]):
        assert 1.7 < a / b < 2.3


@pytest.mark.parametrize("w", [50.0, 100.0, 200.0])
def test_fixed_amplitude_jitter_scales_as_inverse_omega_squared(w):
    f = OscillatingForceSpec(VectorField(GRID, (np.ones(GRID.shape),)), VectorField.zeros(GRID), w)
    tr = newton_true(None, f, w, GRID, [0.0], [0.0], 2 * np.pi / w / 32, 10 * 2 * np.pi / w)
    assert oscillation_amplitude(tr, w) * w ** 2 == pytest.approx(1.0, rel=0.01)


def test_underresolved_fast_step_is_rejected():
    with pytest.raises(ResolutionError):
        newton_true(None, -X ** 2 / 2, 100.0, GRID, [0.0], [0.0], 2 * np.pi / 100 / 8, 1.0)


def test_escape_through_wall():
    with pytest.raises(EscapeError):
        newton_effective(np.zeros(GRID.shape), GRID, [9.0], [5.0], 0.01, 1.0)
    s = newton_effective(np.zeros(GRID.shape), GRID, [[9.0], [0.0]], [5.0], 0.01, 1.0, strict=False)
    assert list(s.escaped) == [True, False]


def test_csv_round_trip(tmp_path):
    s = newton_effective(0.5 * X ** 2, GRID, [[1.0], [-0.5]], [0.0], 0.05, 1.0)
    back = read_trajectory_csv(write_trajectory_csv(tmp_path / "t.csv", s))
    assert np.array_equal(back.positions, s.positions)
    assert np.array_equal(back.velocities, s.velocities)
    assert back.provenance == s.provenance
