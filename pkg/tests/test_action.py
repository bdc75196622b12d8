import numpy as np
import pytest

from oschydro.action import (InsufficientSamples, boundary_flux, classical_action_residual,
                             quantum_action_residual)
from oschydro.grid import Grid

GRID = Grid(16.0, 257, "dirichlet")
X = GRID.axis(0)


def _classical_expansion(grid, dt, n=9):
    x = grid.axis(0)
    t = np.arange(n) * dt
    w = 1 + t[:, None]
    S = x ** 2 / (2 * w)
    rho = np.exp(-(x / w) ** 2 / 2) / (np.sqrt(2 * np.pi) * w)
    return rho, S, t


def _free_gaussian(dt, n=9, drop_phase=False):
    t = np.arange(n) * dt
    w2 = 1 + (t[:, None] / 2) ** 2
    rho = np.exp(-X ** 2 / (2 * w2)) / np.sqrt(2 * np.pi * w2)
    S = X ** 2 * t[:, None] / (8 * w2)
    if not drop_phase:
        S = S - 0.5 * np.arctan(t[:, None] / 2)
    return rho, S, t


def test_free_expansion_solves_classical_equations_up_to_time_differencing():
    # quadratic S is differentiated exactly in space, so only the O(dt^2) time difference remains
    fine = Grid(16.0, 1025, "dirichlet")
    reps = [classical_action_residual(*_classical_expansion(fine, dt), None, fine) for dt in (0.01, 0.005)]
    for attr in ("hj_residual_norm", "continuity_residual_norm"):
        a, b = getattr(reps[0], attr), getattr(reps[1], attr)
        assert a < 1e-4
        assert 3.5 < a / b < 4.5


def test_free_gaussian_satisfies_quantum_equations():
    rho, S, t = _free_gaussian(0.01)
    good = quantum_action_residual(rho, S, t, None, GRID, rho_floor=0.0)
    assert good.hj_residual_norm < 1e-4
    assert good.continuity_residual_norm < 1e-4
    rho, S, t = _free_gaussian(0.01, drop_phase=True)
    bad = quantum_action_residual(rho, S, t, None, GRID, rho_floor=0.0)
    assert bad.hj_residual_norm > 100 * good.hj_residual_norm
    assert abs(good.boundary_term) < 1e-9


def test_boundary_flux_of_a_ramp():
    # d rho/dx = 1 everywhere: outward derivative -1 at the left face, +1 at the right
    assert boundary_flux(X.copy(), GRID) == pytest.approx(0.0, abs=1e-10)
    assert boundary_flux(X ** 2, GRID) == pytest.approx(4 * 8.0, rel=1e-10)


def test_too_few_samples():
    rho, S, t = _free_gaussian(0.01, n=2)
    with pytest.raises(InsufficientSamples):
        quantum_action_residual(rho, S, t, None, GRID, rho_floor=0.0)
