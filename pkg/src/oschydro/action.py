"""Action functionals of the density/action pair and their Euler-Lagrange residuals.

Variations are checked through the residuals of the equations they generate, the
Hamilton-Jacobi equation and the continuity equation, rather than by perturbing the
functional. S is differentiated with fourth-order one-sided-closure differences
because an action field is rarely periodic; the residual norms are density weighted so
the seam of a periodic grid and the far tails carry no weight.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import Grid, PhysicalConstants, derivative, integrate_values
from .schrodinger import DEFAULT_CONSTANTS, potential_values


class InsufficientSamples(ValueError):
    pass


class FloorViolation(ValueError):
    pass


@dataclass
class ActionReport:
    action_value: float
    hj_residual_norm: float           # sqrt(int int rho R^2 / int int rho)
    continuity_residual_norm: float   # sqrt(mean_t int R_c^2)
    boundary_term: float              # max over time of |surface integral of the normal derivative of rho|
    times: np.ndarray = None
    details: dict = field(default_factory=dict)

    def as_dict(self):
        return {"action_value": self.action_value, "hj_residual_norm": self.hj_residual_norm,
                "continuity_residual_norm": self.continuity_residual_norm,
                "boundary_term": self.boundary_term}


def _edge_derivative(values, grid: Grid, axis: int):
    """Outward normal derivative on the two outer planes of an axis (one-sided, 4th order)."""
    h = grid.spacing[axis]
    f = np.moveaxis(values, axis, 0)
    c = np.array([-25, 48, -36, 16, -3]) / (12 * h)
    lower = -np.tensordot(c, f[:5], axes=(0, 0))
    # forward stencil on reversed samples gives -d/dx at the far plane
    upper = -np.tensordot(c, f[::-1][:5], axes=(0, 0))
    return lower, upper


def boundary_flux(rho, grid: Grid) -> float:
    """Surface integral of (d sigma . grad) rho over the faces of the grid box.

    The outer sample planes are treated as the bounding surface, also on periodic axes.
    """
    total = 0.0
    for i in range(grid.dims):
        lower, upper = _edge_derivative(rho, grid, i)
        face = lower + upper
        others = [j for j in range(grid.dims) if j != i]
        if others:
            area = float(np.prod([grid.spacing[j] for j in others]))
            total += float(np.sum(face)) * area
        else:
            total += float(face)
    return total


def _time_derivative(series, times):
    dt = (times[2:] - times[:-2]).reshape((-1,) + (1,) * (series.ndim - 1))
    return (series[2:] - series[:-2]) / dt


def _residuals(rho_series, S_series, times, U, grid, consts, quantum, rho_floor, s_method, rho_method):
    rho_series, S_series, times = (np.asarray(rho_series, dtype=float), np.asarray(S_series, dtype=float),
                                   np.asarray(times, dtype=float))
    if len(times) < 3:
        raise InsufficientSamples("need at least 3 time samples")
    if rho_series.shape != S_series.shape or rho_series.shape[0] != len(times):
        raise ValueError("rho, S and times are not aligned")
    masses = consts.axis_masses(grid.dims)
    hbar = consts.hbar
    if quantum:
        floor = 1e-12 * float(np.max(rho_series)) if rho_floor is None else rho_floor
        if np.any(rho_series < floor):
            raise FloorViolation(f"density below floor {floor:.3e}")
    Uv = potential_values(U, grid, consts)
    dS = _time_derivative(S_series, times)
    drho = _time_derivative(rho_series, times)
    hj, cont, dens, lag = [], [], [], []
    for n in range(1, len(times) - 1):
        rho, S = rho_series[n], S_series[n]
        gS = [derivative(S, grid, i, 1, s_method) for i in range(grid.dims)]
        kinetic = sum(g * g / (2 * m) for g, m in zip(gS, masses))
        base = dS[n - 1] + kinetic + Uv
        if quantum:
            g_rho = [derivative(rho, grid, i, 1, rho_method) for i in range(grid.dims)]
            l_rho = [derivative(rho, grid, i, 2, rho_method) for i in range(grid.dims)]
            grad_log2 = sum((g / rho) ** 2 / m for g, m in zip(g_rho, masses))
            curvature = sum(l / rho / m for l, m in zip(l_rho, masses))
            hj.append(base + hbar ** 2 / 8 * grad_log2 - hbar ** 2 / 4 * curvature)
            lag.append(rho * (base + hbar ** 2 / 8 * grad_log2))
        else:
            hj.append(base)
            lag.append(rho * base)
        flux = sum(derivative(rho * g / m, grid, i, 1, s_method) for i, (g, m) in enumerate(zip(gS, masses)))
        cont.append(drho[n - 1] + flux)
        dens.append(rho)
    return times[1:-1], np.array(hj), np.array(cont), np.array(dens), np.array(lag)


def _report(times, hj, cont, dens, lag, grid, rho_series):
    w = np.array([integrate_values(grid, d) for d in dens])
    num = np.array([integrate_values(grid, d * r * r) for d, r in zip(dens, hj)])
    hj_norm = float(np.sqrt(np.sum(num) / np.sum(w)))
    cont_norm = float(np.sqrt(np.mean([integrate_values(grid, c * c) for c in cont])))
    lag_t = np.array([integrate_values(grid, l) for l in lag])
    action = float(np.trapezoid(lag_t, times)) if len(times) > 1 else 0.0
    boundary = max(abs(boundary_flux(r, grid)) for r in np.asarray(rho_series))
    return ActionReport(action, hj_norm, cont_norm, float(boundary), times,
                        {"hj_by_time": np.sqrt(num / w), "lagrangian_by_time": lag_t})


def classical_action_residual(rho_series, S_series, times, U, grid: Grid,
                              consts: PhysicalConstants = DEFAULT_CONSTANTS, method: str = "fd4-open",
                              rho_method: str = "fd4-open") -> ActionReport:
    """Classical Hamilton-Jacobi functional: integrand rho (dS/dt + |grad S|^2/2m + U)."""
    t, hj, cont, dens, lag = _residuals(rho_series, S_series, times, U, grid, consts, False, None,
                                        method, rho_method)
    return _report(t, hj, cont, dens, lag, grid, rho_series)


def quantum_action_residual(rho_series, S_series, times, U, grid: Grid,
                            consts: PhysicalConstants = DEFAULT_CONSTANTS, rho_floor: float = None,
                            method: str = "fd4-open", rho_method: str = "fd4-open") -> ActionReport:
    """Quantum functional: adds (hbar^2/8m)|grad ln rho|^2 to the integrand.

    Its stationarity conditions are the quantum Hamilton-Jacobi equation with
    U_q = (hbar^2/8m)|grad rho|^2/rho^2 - (hbar^2/4m) lap rho / rho and the continuity equation.
    """
    t, hj, cont, dens, lag = _residuals(rho_series, S_series, times, U, grid, consts, True, rho_floor,
                                        method, rho_method)
    return _report(t, hj, cont, dens, lag, grid, rho_series)
