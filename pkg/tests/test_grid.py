import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oschydro.grid import (Grid, GridMismatchError, NonFiniteFieldError, PhysicalConstants, ScalarField,
                           VectorField, Wavefunction, curl_2d, derivative, divergence, gradient, integrate,
                           integrate_values, laplacian, read_snapshot, write_snapshot)


@given(mode=st.integers(1, 20))
@settings(max_examples=25, deadline=None)
def test_spectral_derivative_of_resolved_sine_is_exact(mode):
    g = Grid(2 * np.pi, 64)
    x = g.axis(0)
    f = np.sin(mode * x)
    assert np.allclose(derivative(f, g, 0, 1), mode * np.cos(mode * x), atol=1e-10 * mode)
    assert np.allclose(derivative(f, g, 0, 2), -mode ** 2 * f, atol=1e-9 * mode ** 2)


@pytest.mark.parametrize("method", ["fd4", "fd4-open"])
@pytest.mark.parametrize("order", [1, 2])
def test_fourth_order_differences_converge_at_fourth_order(method, order):
    errs = []
    for n in (64, 128, 256):
        g = Grid(2.0, n + 1, "dirichlet") if method == "fd4" else Grid(2.0, n)
        x = g.axis(0)
        f = np.exp(np.sin(2 * x))
        exact = 2 * np.cos(2 * x) * f if order == 1 else (4 * np.cos(2 * x) ** 2 - 4 * np.sin(2 * x)) * f
        errs.append(np.max(np.abs(derivative(f, g, 0, order, method) - exact)))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 3.5)


def test_open_differences_are_exact_on_quartic_polynomials_across_the_seam():
    g = Grid(4.0, 40)
    x = g.axis(0)
    f = x ** 4 - 2 * x ** 3 + x
    assert np.allclose(derivative(f, g, 0, 1, "fd4-open"), 4 * x ** 3 - 6 * x ** 2 + 1, atol=1e-9)


def test_integral_of_normalized_gaussian_is_one():
    g = Grid((20.0, 20.0), (128, 96))
    X, Y = g.mesh()
    rho = np.exp(-(X ** 2 + Y ** 2) / 2) / (2 * np.pi)
    assert integrate_values(g, rho) == pytest.approx(1.0, abs=1e-12)
    assert integrate(ScalarField(g, rho)) == pytest.approx(1.0, abs=1e-12)


def test_vector_operators_on_a_rotation_field():
    g = Grid((2 * np.pi, 2 * np.pi), (48, 48))
    X, Y = g.mesh()
    v = VectorField(g, (-np.sin(Y), np.sin(X)))
    assert np.allclose(curl_2d(v).values, np.cos(X) + np.cos(Y), atol=1e-10)
    assert np.allclose(divergence(v).values, 0.0, atol=1e-10)
    f = ScalarField(g, np.sin(X) * np.cos(Y))
    assert np.allclose(laplacian(f).values, -2 * f.values, atol=1e-9)
    gx, gy = gradient(f).components
    assert np.allclose(gx, np.cos(X) * np.cos(Y), atol=1e-10)


def test_field_arithmetic_rejects_mismatched_grids():
    a = ScalarField(Grid(1.0, 16), np.ones(16))
    b = ScalarField(Grid(2.0, 16), np.ones(16))
    with pytest.raises(GridMismatchError):
        a + b
    with pytest.raises(NonFiniteFieldError):
        ScalarField(Grid(1.0, 16), np.full(16, np.nan)).check_finite()


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid(1.0, 4)
    with pytest.raises(ValueError):
        Grid(-1.0, 16)
    with pytest.raises(ValueError):
        derivative(np.zeros(16), Grid(1.0, 16, "dirichlet"), 0, 1, "spectral")


def test_axis_masses_follow_configuration_space():
    assert PhysicalConstants(mass=(1.0, 2.0)).axis_masses(2) == (1.0, 2.0)
    assert PhysicalConstants(mass=3.0).axis_masses(2) == (3.0, 3.0)
    with pytest.raises(ValueError):
        PhysicalConstants(mass=(1.0, 2.0)).axis_masses(3)


@given(values=st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=8, max_size=8),
       t=st.floats(0, 100), mode=st.sampled_from(["csv", "binary"]))
@settings(max_examples=20, deadline=None)
def test_snapshot_round_trip_is_bit_exact(tmp_path_factory, values, t, mode):
    g = Grid(3.0, 8, "dirichlet")
    path = tmp_path_factory.mktemp("snap") / "f.dat"
    write_snapshot(path, ScalarField(g, np.array(values)), t, mode)
    field, t_back = read_snapshot(path, mode)
    assert field.grid == g and t_back == t
    assert np.array_equal(field.values, np.array(values))


def test_complex_snapshot_round_trip(tmp_path):
    g = Grid((2.0, 3.0), (8, 9))
    rng = np.random.default_rng(0)
    psi = Wavefunction(g, rng.normal(size=g.shape) + 1j * rng.normal(size=g.shape))
    for mode in ("csv", "binary"):
        write_snapshot(tmp_path / mode, psi, 1.5, mode)
        back, _ = read_snapshot(tmp_path / mode, mode)
        assert np.array_equal(back.values, psi.values)
