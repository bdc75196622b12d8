"""Named analytic initial states."""

import numpy as np

from .grid import Grid, PhysicalConstants, Wavefunction, integrate_values
from .schrodinger import DEFAULT_CONSTANTS, periodic_harmonic_kappa


def _normalize(grid, rho):
    return rho / integrate_values(grid, rho)


def gaussian_density(grid: Grid, width=1.0, center=None, background=0.0):
    """Normalized Gaussian exp(-|r-c|^2/(2 width^2)) plus a uniform floor of `background` times its peak.

    A small background keeps ln(rho) smooth and bounded on periodic grids.
    """
    width = np.broadcast_to(np.asarray(width, dtype=float), (grid.dims,))
    center = np.zeros(grid.dims) if center is None else np.broadcast_to(np.asarray(center, dtype=float), (grid.dims,))
    g = np.ones(grid.shape)
    for X, s, c in zip(grid.mesh(), width, center):
        g = g * np.exp(-(X - c) ** 2 / (2 * s * s))
    return _normalize(grid, g + background * g.max())


def gaussian_packet(grid: Grid, width=1.0, center=None, momentum=None, background=0.0,
                    consts: PhysicalConstants = DEFAULT_CONSTANTS) -> Wavefunction:
    rho = gaussian_density(grid, width, center, background)
    phase = np.zeros(grid.shape)
    if momentum is not None:
        for X, p in zip(grid.mesh(), np.atleast_1d(momentum)):
            phase = phase + p * X / consts.hbar
    return Wavefunction(grid, np.sqrt(rho) * np.exp(1j * phase))


def product_gaussian_density(grid: Grid, widths, centers, background=0.0):
    """Product of per-axis 1D Gaussians, each carrying its own background floor."""
    rho = np.ones(grid.shape)
    for i, X in enumerate(grid.mesh()):
        g = np.exp(-(X - centers[i]) ** 2 / (2 * widths[i] ** 2))
        rho = rho * (g + background)
    return _normalize(grid, rho)


def harmonic_ground_state(grid: Grid, omega0: float, consts: PhysicalConstants = DEFAULT_CONSTANTS,
                          center=None) -> Wavefunction:
    masses = consts.axis_masses(grid.dims)
    center = np.zeros(grid.dims) if center is None else np.atleast_1d(center)
    log_rho = sum(-m * omega0 * (X - c) ** 2 / consts.hbar for X, m, c in zip(grid.mesh(), masses, center))
    rho = _normalize(grid, np.exp(log_rho))
    return Wavefunction(grid, np.sqrt(rho))


def periodic_harmonic_ground_state(grid: Grid, omega0: float,
                                   consts: PhysicalConstants = DEFAULT_CONSTANTS) -> Wavefunction:
    """Exact ground state of the periodic_harmonic potential, energy hbar*omega0/2 per axis."""
    log_rho = np.zeros(grid.shape)
    for i, X in enumerate(grid.mesh()):
        kappa, k = periodic_harmonic_kappa(grid, consts, omega0, i)
        log_rho = log_rho + kappa * np.cos(k * X)
    rho = _normalize(grid, np.exp(log_rho - log_rho.max()))
    return Wavefunction(grid, np.sqrt(rho))


def coherent_state(grid: Grid, omega0: float, displacement: float,
                   consts: PhysicalConstants = DEFAULT_CONSTANTS) -> Wavefunction:
    """Displaced harmonic ground state (1D); its centre follows the classical oscillator."""
    return harmonic_ground_state(grid, omega0, consts, center=[displacement] + [0.0] * (grid.dims - 1))


def plane_wave(grid: Grid, mode=1, consts: PhysicalConstants = DEFAULT_CONSTANTS) -> Wavefunction:
    """exp(i k x) with k the `mode`-th allowed wavenumber along axis 0."""
    k = 2 * np.pi * mode / grid.extents[0]
    X = grid.mesh()[0]
    volume = float(np.prod(grid.extents))
    return Wavefunction(grid, np.exp(1j * k * X) / np.sqrt(volume))
