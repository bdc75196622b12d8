"""Quantum potential, its two-part split, effective potentials and the ponderomotive potential."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import PhysicalConstants, ScalarField, VectorField, derivative, gradient_values
from .schrodinger import DEFAULT_CONSTANTS, default_floor

SQRT2 = np.sqrt(2.0)


class FloorViolation(ValueError):
    pass


@dataclass(frozen=True)
class QuantumPotentialSet:
    U_q: ScalarField
    U_q_prime: ScalarField
    U_q_dprime: ScalarField
    U_ef_schrodinger: ScalarField
    U_ef_variational: ScalarField


@dataclass(frozen=True)
class OscillatingForceSpec:
    """Force f_c cos(omega t) + f_s sin(omega t)."""
    f_c: VectorField
    f_s: VectorField
    omega: float

    def slowness_ratio(self, slow_time: float) -> float:
        """omega * T_slow; reported, not enforced."""
        return self.omega * slow_time


def _checked(rho: ScalarField, rho_floor):
    floor = default_floor(rho.values) if rho_floor is None else rho_floor
    low = rho.values < floor
    if low.any():
        where = tuple(int(i) for i in np.argwhere(low)[0])
        raise FloorViolation(f"density below floor {floor:.3e} at index {where}")
    return rho.values, floor


def _masses(consts, grid):
    return consts.axis_masses(grid.dims)


def quantum_potential(rho: ScalarField, consts: PhysicalConstants = DEFAULT_CONSTANTS,
                      rho_floor: float = None, method: str = "auto") -> ScalarField:
    """-hbar^2/(2m) lap(sqrt rho)/sqrt rho, with per-axis masses in configuration space."""
    r, _ = _checked(rho, rho_floor)
    grid = rho.grid
    amp = np.sqrt(r)
    out = sum(-consts.hbar ** 2 / (2 * m) * derivative(amp, grid, i, 2, method)
              for i, m in enumerate(_masses(consts, grid)))
    return ScalarField(grid, out / amp)


def quantum_potential_expanded(rho: ScalarField, consts: PhysicalConstants = DEFAULT_CONSTANTS,
                               rho_floor: float = None, method: str = "auto") -> ScalarField:
    """Same potential written through derivatives of rho itself (cross-check of the sqrt form)."""
    r, _ = _checked(rho, rho_floor)
    grid = rho.grid
    out = np.zeros(grid.shape)
    for i, m in enumerate(_masses(consts, grid)):
        d1 = derivative(r, grid, i, 1, method)
        d2 = derivative(r, grid, i, 2, method)
        out = out + consts.hbar ** 2 / (8 * m) * (d1 / r) ** 2 - consts.hbar ** 2 / (4 * m) * d2 / r
    return ScalarField(grid, out)


def quantum_potential_parts(rho: ScalarField, consts: PhysicalConstants = DEFAULT_CONSTANTS,
                            rho_floor: float = None, method: str = "auto"):
    """(U'_q, U''_q): the squared log-gradient part and the curvature part."""
    r, floor = _checked(rho, rho_floor)
    grid = rho.grid
    log_rho = np.log(np.maximum(r, floor))
    prime = np.zeros(grid.shape)
    dprime = np.zeros(grid.shape)
    for i, m in enumerate(_masses(consts, grid)):
        prime = prime + consts.hbar ** 2 / (8 * m) * derivative(log_rho, grid, i, 1, method) ** 2
        dprime = dprime - consts.hbar ** 2 / (4 * m) * derivative(r, grid, i, 2, method) / r
    return ScalarField(grid, prime), ScalarField(grid, dprime)


def decomposition_residual(rho: ScalarField, consts=DEFAULT_CONSTANTS, rho_floor=None, method="auto") -> float:
    """max|U_q - (U'_q + U''_q)| / max|U_q|."""
    uq = quantum_potential(rho, consts, rho_floor, method).values
    p, dp = quantum_potential_parts(rho, consts, rho_floor, method)
    return float(np.max(np.abs(uq - p.values - dp.values)) / np.max(np.abs(uq)))


def effective_potential(U: ScalarField, rho: ScalarField, variant: str = "schrodinger",
                        t: float = 0.0, omega: float = None,
                        consts: PhysicalConstants = DEFAULT_CONSTANTS, rho_floor: float = None) -> ScalarField:
    """U plus the quantum correction for the chosen variant.

    schrodinger: U + U_q.  variational: U + U'_q.
    true_oscillating: U - (hbar omega/sqrt2) cos(omega t) ln rho.
    """
    if U.grid != rho.grid:
        raise ValueError("U and rho live on different grids")
    if variant == "schrodinger":
        return ScalarField(U.grid, U.values + quantum_potential(rho, consts, rho_floor).values)
    if variant == "variational":
        prime, _ = quantum_potential_parts(rho, consts, rho_floor)
        return ScalarField(U.grid, U.values + prime.values)
    if variant == "true_oscillating":
        if omega is None or omega <= 0:
            raise ValueError("true_oscillating variant needs omega > 0")
        r, floor = _checked(rho, rho_floor)
        phase = np.cos(omega * t)
        osc = consts.hbar * omega / SQRT2 * phase * np.log(np.maximum(r, floor))
        return ScalarField(U.grid, U.values - osc)
    raise ValueError(f"unknown effective-potential variant {variant!r}")


def ponderomotive_potential(force: OscillatingForceSpec, consts: PhysicalConstants = DEFAULT_CONSTANTS) -> ScalarField:
    """(|f_c|^2 + |f_s|^2) / (4 m omega^2), per-axis masses in configuration space."""
    if not force.omega > 0:
        raise ValueError("omega must be positive")
    grid = force.f_c.grid
    masses = _masses(consts, grid)
    total = sum((fc ** 2 + fs ** 2) / m for fc, fs, m in zip(force.f_c.components, force.f_s.components, masses))
    return ScalarField(grid, total / (4 * force.omega ** 2))


def log_gradient_force(rho: ScalarField, omega: float, consts: PhysicalConstants = DEFAULT_CONSTANTS,
                       rho_floor: float = None) -> OscillatingForceSpec:
    """The cosine force (hbar omega/sqrt2) grad ln rho, whose ponderomotive potential is U'_q."""
    r, floor = _checked(rho, rho_floor)
    grid = rho.grid
    grads = gradient_values(np.log(np.maximum(r, floor)), grid)
    fc = VectorField(grid, tuple(consts.hbar * omega / SQRT2 * g for g in grads))
    return OscillatingForceSpec(fc, VectorField.zeros(grid), omega)


def wave_ponderomotive_force(grid, amplitude, wavenumber: float, omega: float,
                             consts: PhysicalConstants = DEFAULT_CONSTANTS) -> OscillatingForceSpec:
    """Charged particle in a standing wave E0(x) cos(omega t): f_c = q E0(x)."""
    X = grid.mesh()[0]
    e0 = np.asarray(amplitude) * np.cos(wavenumber * X)
    comps = [consts.charge * e0] + [np.zeros(grid.shape)] * (grid.dims - 1)
    return OscillatingForceSpec(VectorField(grid, tuple(comps)), VectorField.zeros(grid), omega)


def potential_set(U: ScalarField, rho: ScalarField, consts=DEFAULT_CONSTANTS, rho_floor=None) -> QuantumPotentialSet:
    uq = quantum_potential(rho, consts, rho_floor)
    p, dp = quantum_potential_parts(rho, consts, rho_floor)
    return QuantumPotentialSet(uq, p, dp,
                               effective_potential(U, rho, "schrodinger", consts=consts, rho_floor=rho_floor),
                               effective_potential(U, rho, "variational", consts=consts, rho_floor=rho_floor))
