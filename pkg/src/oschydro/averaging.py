"""Cycle averaging, fast/slow splitting and checks of the averaging identities."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import Grid, PhysicalConstants, ScalarField, derivative, integrate_values
from .quantum_potential import quantum_potential
from .schrodinger import DEFAULT_CONSTANTS, potential_values

SQRT2 = np.sqrt(2.0)


class AlignmentError(ValueError):
    pass


@dataclass
class FastSlowDecomposition:
    times: np.ndarray
    slow_rho: np.ndarray
    slow_S: np.ndarray
    fast_zeta: np.ndarray
    fast_sigma: np.ndarray
    window: int
    omega: float

    def mean_ratio(self):
        """Window means of zeta and sigma relative to their RMS (should be small)."""
        out = {}
        for name, f in (("zeta", self.fast_zeta), ("sigma", self.fast_sigma)):
            rms = np.sqrt(np.mean(f ** 2))
            out[name] = float(np.sqrt(np.mean(np.mean(f, axis=0) ** 2)) / rms) if rms > 0 else 0.0
        return out


@dataclass
class ScaleEstimates:
    V: float
    L: float
    T: float
    S_m: float
    ratio_omegaT: float
    zeta_rho_bound: float


@dataclass
class IdentityReport:
    cross_term: float          # |<zeta grad sigma>| relative to its Cauchy-Schwarz bound
    kinetic_term: float        # <|grad sigma|^2>/2m vs hbar^2 |grad rho|^2/(8 m rho^2)
    pressure_term: float       # (hbar w/(sqrt2 rho)) <zeta cos wt> vs hbar^2 lap rho/(4 m rho)
    tolerance: float
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return max(self.cross_term, self.kinetic_term, self.pressure_term) <= self.tolerance

    def as_dict(self):
        return {"cross_term": self.cross_term, "kinetic_term": self.kinetic_term,
                "pressure_term": self.pressure_term, "tolerance": self.tolerance, "passed": self.passed}


def samples_per_period(omega, dt) -> int:
    K = 2 * np.pi / (omega * dt)
    if abs(K - round(K)) > 1e-6 * K:
        raise AlignmentError("sampling step does not divide the fast period")
    return int(round(K))


def window_weights(n_intervals: int) -> np.ndarray:
    """Trapezoid weights over n_intervals+1 samples, normalized to unit sum."""
    w = np.ones(n_intervals + 1)
    w[0] = w[-1] = 0.5
    return w / n_intervals


def period_mean(series, weights_axis=0):
    """Trapezoid mean of a series sampled over exactly whole periods (first and last sample included)."""
    series = np.asarray(series)
    w = window_weights(series.shape[0] - 1)
    return np.tensordot(w, series, axes=([0], [weights_axis]))


def cycle_average(series, times, omega: float, window_periods: int = 1):
    """Centred moving trapezoid average over exactly `window_periods` periods.

    Returns (centre_times, averaged_series); windows that would leave the series are dropped.
    """
    series = np.asarray(series, dtype=float)
    times = np.asarray(times, dtype=float)
    if window_periods < 1 or int(window_periods) != window_periods:
        raise ValueError("window must be a positive whole number of periods")
    dt = times[1] - times[0]
    if not np.allclose(np.diff(times), dt, rtol=1e-9, atol=1e-12):
        raise AlignmentError("series must be uniformly sampled")
    K = samples_per_period(omega, dt)
    W = K * int(window_periods)
    n = series.shape[0]
    if W >= n:
        raise ValueError("averaging window exceeds the series span")
    csum = np.concatenate([np.zeros((1,) + series.shape[1:]), np.cumsum(series, axis=0)])
    starts = np.arange(0, n - W)
    total = csum[starts + W + 1] - csum[starts]
    avg = (total - 0.5 * series[starts] - 0.5 * series[starts + W]) / W
    return times[starts] + 0.5 * W * dt, avg


def extract_fast(series, times, slow_series, slow_times):
    """Pointwise residual series - slow at the slow sample times."""
    series = np.asarray(series)
    times = np.asarray(times)
    idx = np.searchsorted(times, np.asarray(slow_times) - 1e-9 * max(1.0, abs(times[-1])))
    if np.any(idx >= len(times)) or not np.allclose(times[np.minimum(idx, len(times) - 1)], slow_times,
                                                    rtol=0, atol=1e-9 * max(1.0, abs(times[-1]))):
        raise AlignmentError("slow series times are not a subset of the series times")
    return series[idx] - np.asarray(slow_series)


def decompose(times, rho_r, S_r, omega, window_periods=1) -> FastSlowDecomposition:
    """Fast/slow split of rho_r and S_r series by centred cycle averaging."""
    tc, slow_rho = cycle_average(rho_r, times, omega, window_periods)
    _, slow_S = cycle_average(S_r, times, omega, window_periods)
    if not np.allclose(tc, np.round(tc / (times[1] - times[0])) * (times[1] - times[0])):
        raise AlignmentError("window centres fall between samples; use an even sample count per window")
    zeta = extract_fast(rho_r, times, slow_rho, tc)
    sigma = extract_fast(S_r, times, slow_S, tc)
    return FastSlowDecomposition(tc, slow_rho, slow_S, zeta, sigma, window_periods, omega)


def analytic_fast_components(rho, times, omega, grid: Grid, consts: PhysicalConstants = DEFAULT_CONSTANTS):
    """sigma(t) = (hbar/sqrt2) sin(wt) ln rho, zeta(t) = hbar/(sqrt2 w) cos(wt) sum_k lap_k rho / m_k.

    rho may be a single field or a series aligned with `times`.
    """
    rho = np.asarray(rho)
    times = np.asarray(times)
    series = rho.ndim == grid.dims + 1
    masses = consts.axis_masses(grid.dims)
    hbar = consts.hbar

    def lap_over_m(r):
        return sum(derivative(r, grid, i, 2) / m for i, m in enumerate(masses))

    rs = rho if series else np.broadcast_to(rho, (len(times),) + rho.shape)
    sigma = np.array([hbar / SQRT2 * np.sin(omega * t) * np.log(r) for t, r in zip(times, rs)])
    zeta = np.array([hbar / (SQRT2 * omega) * np.cos(omega * t) * lap_over_m(r) for t, r in zip(times, rs)])
    return sigma, zeta


def relative_rms(estimate, reference) -> float:
    estimate, reference = np.asarray(estimate), np.asarray(reference)
    return float(np.sqrt(np.mean((estimate - reference) ** 2)) / np.sqrt(np.mean(reference ** 2)))


def _rel(lhs, rhs, weight=None):
    w = 1.0 if weight is None else weight
    den = np.sqrt(np.sum(w * rhs ** 2))
    num = np.sqrt(np.sum(w * (lhs - rhs) ** 2))
    if den == 0:
        return float(num)
    return float(num / den)


def verify_identities(sigma, zeta, rho, omega: float, times, grid: Grid,
                      consts: PhysicalConstants = DEFAULT_CONSTANTS, tolerance: float = 1e-6) -> IdentityReport:
    """Check the three averaged identities over one window of whole periods.

    sigma, zeta: series sampled over whole periods, first and last sample included.
    rho: slow density (one field) used on the right-hand sides.

    The kinetic and pressure residuals are density-weighted relative L2 norms: both
    right-hand sides divide by rho, and unweighted norms would measure round-off in the
    far tails rather than the identities.
    """
    sigma, zeta, rho = np.asarray(sigma), np.asarray(zeta), np.asarray(rho)
    times = np.asarray(times)
    span = (times[-1] - times[0]) * omega / (2 * np.pi)
    if abs(span - round(span)) > 1e-6 or round(span) < 1:
        raise AlignmentError("identity window must cover whole periods")
    masses = consts.axis_masses(grid.dims)
    hbar = consts.hbar
    cos_t = np.cos(omega * times).reshape((-1,) + (1,) * grid.dims)

    grad_sigma = [np.array([derivative(s, grid, i, 1) for s in sigma]) for i in range(grid.dims)]
    cross = np.array([period_mean(zeta * g) for g in grad_sigma])
    bound = np.array([np.sqrt(period_mean(zeta ** 2) * period_mean(g ** 2)) for g in grad_sigma])
    cross_rel = float(np.linalg.norm(cross) / np.linalg.norm(bound)) if np.linalg.norm(bound) > 0 \
        else float(np.linalg.norm(cross))

    kin_lhs = sum(period_mean(g ** 2) / (2 * m) for g, m in zip(grad_sigma, masses))
    kin_rhs = sum(hbar ** 2 / (8 * m) * (derivative(rho, grid, i, 1) / rho) ** 2 for i, m in enumerate(masses))
    pres_lhs = hbar * omega / (SQRT2 * rho) * period_mean(zeta * cos_t)
    pres_rhs = sum(hbar ** 2 / (4 * m) * derivative(rho, grid, i, 2) / rho for i, m in enumerate(masses))
    w = rho / np.max(rho)
    return IdentityReport(cross_rel, _rel(kin_lhs, kin_rhs, w), _rel(pres_lhs, pres_rhs, w), tolerance,
                          {"kinetic_lhs": kin_lhs, "kinetic_rhs": kin_rhs,
                           "pressure_lhs": pres_lhs, "pressure_rhs": pres_rhs})


def _time_derivative(series, times):
    series, times = np.asarray(series), np.asarray(times)
    if len(times) < 3:
        raise ValueError("need at least 3 time samples")
    dt = (times[2:] - times[:-2]).reshape((-1,) + (1,) * (series.ndim - 1))
    return (series[2:] - series[:-2]) / dt


def recovered_slow_residual(rho_series, S_series, times, U, grid: Grid,
                            consts: PhysicalConstants = DEFAULT_CONSTANTS, method: str = "auto",
                            rho_floor: float = None):
    """Residuals of the quantum Hamilton-Jacobi and continuity equations on slow data.

    Time derivatives are centred differences, so the residuals live at the interior
    times and carry an O(dt^2) floor. Returns (interior_times, hj_residual, continuity_residual).
    """
    rho_series, S_series, times = np.asarray(rho_series), np.asarray(S_series), np.asarray(times)
    masses = consts.axis_masses(grid.dims)
    Uv = potential_values(U, grid, consts)
    dS = _time_derivative(S_series, times)
    drho = _time_derivative(rho_series, times)
    hj, cont = [], []
    for n in range(1, len(times) - 1):
        rho, S = rho_series[n], S_series[n]
        grads = [derivative(S, grid, i, 1, method) for i in range(grid.dims)]
        kinetic = sum(g * g / (2 * m) for g, m in zip(grads, masses))
        uq = quantum_potential(ScalarField(grid, rho), consts, rho_floor).values
        hj.append(dS[n - 1] + kinetic + Uv + uq)
        flux = sum(derivative(rho * g / m, grid, i, 1, method) for i, (g, m) in enumerate(zip(grads, masses)))
        cont.append(drho[n - 1] + flux)
    return times[1:-1], np.array(hj), np.array(cont)


def weighted_norm(field_values, rho, grid: Grid) -> float:
    """sqrt(integral rho f^2) / sqrt(integral rho)."""
    return float(np.sqrt(integrate_values(grid, rho * field_values ** 2) / integrate_values(grid, rho)))


def scale_estimates(rho, S, grid: Grid, omega: float = None,
                    consts: PhysicalConstants = DEFAULT_CONSTANTS) -> ScaleEstimates:
    rho, S = np.asarray(rho), np.asarray(S)
    masses = consts.axis_masses(grid.dims)
    speed2 = sum((derivative(S, grid, i, 1) / m) ** 2 for i, m in enumerate(masses))
    V = float(np.sqrt(np.max(speed2)))
    mass_total = integrate_values(grid, rho)
    var = 0.0
    for X in grid.mesh():
        mean = integrate_values(grid, rho * X) / mass_total
        var += integrate_values(grid, rho * (X - mean) ** 2) / mass_total
    L = float(np.sqrt(var))
    m = masses[0]
    if V == 0:
        return ScaleEstimates(0.0, L, float("inf"), 0.0, 0.0, 0.0)
    T = L / V
    S_m = m * V * L
    ratio = 1.0 / (omega * T) if omega else float("nan")
    return ScaleEstimates(V, L, T, S_m, ratio, consts.hbar / (2 * S_m) * ratio)
