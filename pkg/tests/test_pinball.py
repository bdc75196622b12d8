import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oschydro.grid import Grid
from oschydro.pinball import (DeltaSourceField, EnsembleState, SeparationError, StepSizeError, ensemble_density,
                              evolve_ensemble, kernel, kernel_gradient, kernel_property_error, pinball_force,
                              read_ensemble_snapshot, sample_ensemble, sample_sources, write_ensemble_snapshot)


@given(seed=st.integers(0, 10_000), n=st.floats(0.5, 20.0))
@settings(max_examples=25, deadline=None)
def test_source_count_is_poisson(seed, n):
    s = sample_sources((10.0, 10.0), n, 0.01, seed)
    mean = n * 100
    assert abs(s.count - mean) < 4 * np.sqrt(mean)
    assert np.all(np.abs(s.positions) <= 5.0)


def test_sources_are_reproducible_and_seed_dependent():
    a = sample_sources((20.0,), 5.0, 0.02, 7)
    b = sample_sources((20.0,), 5.0, 0.02, 7)
    c = sample_sources((20.0,), 5.0, 0.02, 8)
    assert np.array_equal(a.positions, b.positions)
    assert not np.array_equal(a.positions, c.positions)


def test_counts_in_disjoint_halves_are_uncorrelated():
    left, right = [], []
    for seed in range(400):
        x = sample_sources((10.0,), 3.0, 0.01, seed).positions[:, 0]
        left.append(np.sum(x < 0))
        right.append(np.sum(x >= 0))
    r = np.corrcoef(left, right)[0, 1]
    assert abs(r) < 3 / np.sqrt(400)
    assert np.var(left) == pytest.approx(15.0, rel=0.25)


def test_kernel_is_normalized_with_analytic_gradient():
    eps = 0.3
    x = np.linspace(-3, 3, 6001)[:, None]
    assert np.trapezoid(kernel(x, eps), x[:, 0]) == pytest.approx(1.0, abs=1e-10)
    h = 1e-6
    num = (kernel(x + h, eps) - kernel(x - h, eps)) / (2 * h)
    assert np.allclose(kernel_gradient(x, eps)[:, 0], num, atol=1e-6)


def test_separation_guard():
    with pytest.raises(SeparationError):
        DeltaSourceField(np.zeros((1, 1)), 10.0, 0.1, (10.0,))


def test_force_far_from_sources_is_potential_gradient():
    g = Grid(20.0, 401, "dirichlet")
    U = 0.5 * g.axis(0) ** 2
    src = DeltaSourceField(np.array([[5.0]]), 0.05, 0.05, (20.0,), omega=10.0)
    f = pinball_force(np.array([[-2.0], [1.0]]), 0.3, src, U, g)
    assert np.allclose(f[:, 0], [2.0, -1.0], atol=1e-10)
    # at the source centre the kernel gradient vanishes
    assert pinball_force(np.array([5.0]), 0.3, src, U, g)[0] == pytest.approx(-5.0, abs=1e-10)


def test_amplitude_zero_crossing_removes_source_force():
    w = 4.0
    src = DeltaSourceField(np.array([[0.0]]), 0.05, 0.05, (20.0,), omega=w)
    t0 = np.pi / (2 * w)
    assert src.amplitude(t0) == pytest.approx(0.0, abs=1e-12)
    assert pinball_force(np.array([0.03]), t0, src)[0] == pytest.approx(0.0, abs=1e-9)
    assert src.pressure_coefficient(0.0) == pytest.approx(-w / np.sqrt(2))


def test_single_particle_without_sources_moves_straight():
    empty = sample_sources((10.0,), 0.0, 0.01, 0)
    ens = EnsembleState(np.array([[0.5]]), np.array([[1.5]]))
    ser = evolve_ensemble(ens, empty, None, 10.0, 2 * np.pi / 10 / 32, 2.0)
    assert np.allclose(ser.positions[:, 0, 0], 0.5 + 1.5 * ser.times, atol=1e-12)


def test_harmonic_period_in_ensemble_integrator():
    g = Grid(20.0, 801, "dirichlet")
    empty = sample_sources((20.0,), 0.0, 0.01, 0)
    ens = EnsembleState(np.array([[2.0]]), np.array([[0.0]]))
    ser = evolve_ensemble(ens, empty, 0.5 * g.axis(0) ** 2, 50.0, 2 * np.pi / 50 / 32, 4 * np.pi, grid=g)
    x, t = ser.positions[:, 0, 0], ser.times
    i = np.where((x[:-1] > 0) & (x[1:] <= 0))[0]
    tz = t[i] + x[i] / (x[i] - x[i + 1]) * (t[i + 1] - t[i])
    assert np.diff(tz)[0] == pytest.approx(2 * np.pi, rel=1e-3)


def test_step_size_guards():
    src = sample_sources((10.0,), 1.0, 0.05, 1, omega=10.0)
    fast = EnsembleState(np.zeros((1, 1)), np.full((1, 1), 100.0))
    with pytest.raises(StepSizeError):
        evolve_ensemble(fast, src, None, 10.0, 2 * np.pi / 10 / 32, 0.1)
    with pytest.raises(StepSizeError):
        evolve_ensemble(fast, src, None, 10.0, 2 * np.pi / 10 / 4, 0.1)


def test_evolution_is_deterministic_for_fixed_seeds():
    src = sample_sources((20.0,), 2.0, 0.05, 3, omega=20.0, hbar=0.01)
    runs = [evolve_ensemble(sample_ensemble(200, 1, 11), src, None, 20.0, 2 * np.pi / 20 / 64, 0.5)
            for _ in range(2)]
    assert np.array_equal(runs[0].positions, runs[1].positions)


def test_identical_velocities_give_exact_flux_and_no_spread():
    g = Grid(16.0, 128)
    ens = sample_ensemble(5000, 1, 2, velocity_mean=0.7)
    mom = ensemble_density(ens, g, 0.3)
    core = mom.rho > 1e-3 * mom.rho.max()
    assert np.allclose(mom.velocity[0][core], 0.7, rtol=1e-10)
    assert np.allclose(mom.spread()[0, 0][core], 0.0, atol=1e-10)
    assert np.sum(mom.rho) * g.cell_volume == pytest.approx(1.0, rel=1e-10)


def test_isotropic_velocities_give_isotropic_spread():
    g = Grid((12.0, 12.0), (64, 64))
    ens = sample_ensemble(40000, 2, 5, velocity_std=0.5)
    iso = ensemble_density(ens, g, 0.4).isotropy()
    assert iso["diagonal"][0] == pytest.approx(0.25, rel=0.1)
    assert iso["diagonal"][1] == pytest.approx(0.25, rel=0.1)
    assert abs(iso["off_diagonal"][0]) < 0.025


@pytest.mark.parametrize("eps", [0.2, 0.1])
def test_kernel_identity_error_is_second_order(eps):
    P = lambda r: np.exp(-np.sum(r * r, axis=-1))
    dP = lambda r: -2 * r * P(r)
    e1 = kernel_property_error(P, dP, [0.4], eps)
    e2 = kernel_property_error(P, dP, [0.4], eps / 2)
    assert e1 / e2 > 3.5


def test_ensemble_snapshot_round_trip(tmp_path):
    ens = sample_ensemble(50, 2, 9, velocity_std=1.0)
    ens.t = 1.25
    back = read_ensemble_snapshot(write_ensemble_snapshot(tmp_path / "e.csv", ens))
    assert np.array_equal(back.positions, ens.positions)
    assert np.array_equal(back.velocities, ens.velocities)
    assert back.t == 1.25 and back.seed == 9
