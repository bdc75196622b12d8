"""Particle integrators driven by lattice fields.

Three provenances share one sample type: `kinematic` follows v = grad S / m,
`newton_effective` integrates m r'' = -grad U_ef, and `newton_true` integrates
against the oscillating potential U - (hbar omega/sqrt2) cos(omega t) ln rho.
Fields are interpolated multilinearly in space and linearly in time.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .averaging import cycle_average
from .grid import DIRICHLET, Grid, PhysicalConstants, ScalarField, derivative
from .quantum_potential import OscillatingForceSpec
from .schrodinger import DEFAULT_CONSTANTS, potential_values

SQRT2 = np.sqrt(2.0)
PROVENANCES = ("kinematic", "newton_effective", "newton_true")


class EscapeError(RuntimeError):
    pass


class NodeProximityError(RuntimeError):
    pass


class ResolutionError(ValueError):
    pass


@dataclass
class TrajectorySample:
    """Positions and velocities on a uniform time base.

    For a batch of M starting points `positions` has shape (n_t, M, d), otherwise (n_t, d).
    """
    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    provenance: str
    escaped: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")

    def cycle_averaged(self, omega: float, window_periods: int = 1):
        """(centre_times, averaged positions) over whole fast periods."""
        return cycle_average(self.positions, self.times, omega, window_periods)


class FieldInterpolator:
    """Multilinear interpolation of one or more lattice fields.

    Periodic axes wrap; dirichlet axes report points outside [-L/2, L/2] as escaped.
    """

    def __init__(self, grid: Grid):
        self.grid = grid
        self.lo = np.array([grid.axis(i)[0] for i in range(grid.dims)])
        self.h = np.array(grid.spacing)
        self.n = np.array(grid.shape)
        self.periodic = np.array([b != DIRICHLET for b in grid.boundary])

    def outside(self, r):
        r = np.atleast_2d(r)
        hi = self.lo + self.h * (self.n - 1)
        bad = np.zeros(r.shape[0], dtype=bool)
        for i in range(self.grid.dims):
            if not self.periodic[i]:
                bad |= (r[:, i] < self.lo[i]) | (r[:, i] > hi[i])
        return bad

    def _corners(self, r):
        r = np.atleast_2d(r)
        s = (r - self.lo) / self.h
        i0 = np.floor(s).astype(int)
        frac = s - i0
        idx0, idx1 = [], []
        for i in range(self.grid.dims):
            a, b = i0[:, i], i0[:, i] + 1
            if self.periodic[i]:
                a, b = a % self.n[i], b % self.n[i]
            else:
                a = np.clip(a, 0, self.n[i] - 2)
                b = a + 1
                frac[:, i] = np.clip(s[:, i] - a, 0.0, 1.0)
            idx0.append(a)
            idx1.append(b)
        return idx0, idx1, frac

    def __call__(self, values, r):
        """Interpolate `values` (grid-shaped, or stacked with the grid axes last) at points r (M, d)."""
        values = np.asarray(values)
        lead = values.shape[:values.ndim - self.grid.dims]
        idx0, idx1, frac = self._corners(r)
        d = self.grid.dims
        out = np.zeros(lead + (frac.shape[0],))
        for corner in range(2 ** d):
            w = np.ones(frac.shape[0])
            index = []
            for i in range(d):
                upper = (corner >> i) & 1
                w = w * (frac[:, i] if upper else 1.0 - frac[:, i])
                index.append(idx1[i] if upper else idx0[i])
            out = out + w * values[(Ellipsis,) + tuple(index)]
        return out


class FieldSeries:
    """A field sampled at increasing times, evaluated by linear interpolation in time.

    A single array (no times) is treated as static.
    """

    def __init__(self, frames, times=None):
        frames = np.asarray(frames, dtype=float)
        if times is None:
            self.frames = frames[None]
            self.times = np.array([0.0])
        else:
            self.frames = frames
            self.times = np.asarray(times, dtype=float)
            if self.frames.shape[0] != len(self.times):
                raise ValueError("frames and times differ in length")
            if len(self.times) > 1 and np.any(np.diff(self.times) <= 0):
                raise ValueError("times must increase")

    @property
    def static(self):
        return len(self.times) == 1

    def span(self):
        return self.times[0], self.times[-1]

    def at(self, t):
        if self.static:
            return self.frames[0]
        if t < self.times[0] - 1e-12 or t > self.times[-1] + 1e-12:
            raise ValueError(f"time {t} outside the field series")
        j = int(np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(self.times) - 2))
        w = (t - self.times[j]) / (self.times[j + 1] - self.times[j])
        return (1 - w) * self.frames[j] + w * self.frames[j + 1]

    def map(self, fn):
        out = FieldSeries.__new__(FieldSeries)
        out.frames = np.array([fn(f) for f in self.frames])
        out.times = self.times
        return out


def _as_series(obj, times=None):
    if isinstance(obj, FieldSeries):
        return obj
    if isinstance(obj, ScalarField):
        obj = obj.values
    return FieldSeries(obj, times)


def _gradient_frames(series: FieldSeries, grid: Grid, scale):
    return series.map(lambda f: np.stack([scale[i] * derivative(f, grid, i, 1) for i in range(grid.dims)]))


def _batch(r0, dims):
    r0 = np.asarray(r0, dtype=float)
    single = r0.ndim == 1
    r = np.atleast_2d(r0).copy()
    if r.shape[1] != dims:
        raise ValueError("starting points need one coordinate per grid axis")
    return r, single


def _finish(times, pos, vel, provenance, single, escaped, meta):
    pos, vel = np.array(pos), np.array(vel)
    if single:
        pos, vel = pos[:, 0], vel[:, 0]
        escaped = bool(escaped[0])
    return TrajectorySample(np.array(times), pos, vel, provenance, escaped, meta)


def kinematic_trajectory(S_series, grid: Grid, r0, dt: float, duration: float, times=None,
                         consts: PhysicalConstants = DEFAULT_CONSTANTS, rho_series=None,
                         rho_floor: float = None, strict: bool = True) -> TrajectorySample:
    """RK4 integration of r' = grad S / m through a (time-interpolated) action field.

    S_series: static field, FieldSeries, or frames with `times`.
    rho_series: optional density; a sample point where it falls below `rho_floor`
    raises NodeProximityError. Escapes through dirichlet walls raise EscapeError when
    `strict`, otherwise the particle is frozen and flagged.
    """
    S = _as_series(S_series, times)
    masses = consts.axis_masses(grid.dims)
    vel_field = _gradient_frames(S, grid, [1.0 / m for m in masses])
    rho = None if rho_series is None else _as_series(rho_series, times)
    interp = FieldInterpolator(grid)
    r, single = _batch(r0, grid.dims)
    t0 = 0.0 if S.static else S.times[0]
    steps = int(round(duration / dt))
    if not S.static and t0 + steps * dt > S.times[-1] * (1 + 1e-12) + 1e-12:
        raise ValueError("action series does not span the requested window")
    floor = rho_floor
    if rho is not None and floor is None:
        floor = 1e-12 * float(np.max(rho.frames))
    escaped = np.zeros(r.shape[0], dtype=bool)

    def velocity(t, x):
        return interp(vel_field.at(t), x).T

    def check(t, x):
        if rho is not None:
            low = interp(rho.at(t), x) < floor
            if np.any(low):
                raise NodeProximityError(f"density below floor near {x[np.argmax(low)]} at t={t:.6g}")

    ts, pos, vel = [t0], [r.copy()], [velocity(t0, r)]
    t = t0
    for n in range(steps):
        check(t, r)
        k1 = velocity(t, r)
        k2 = velocity(t + dt / 2, r + dt / 2 * k1)
        k3 = velocity(t + dt / 2, r + dt / 2 * k2)
        k4 = velocity(t + dt, r + dt * k3)
        new = r + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        out = interp.outside(new)
        if out.any():
            if strict:
                raise EscapeError(f"trajectory left the domain at t={t + dt:.6g}")
            new[out] = r[out]
            escaped |= out
        r = new
        t = t0 + (n + 1) * dt
        ts.append(t)
        pos.append(r.copy())
        v = velocity(t, r)
        v[escaped] = 0.0
        vel.append(v)
    return _finish(ts, pos, vel, "kinematic", single, escaped, {"dt": dt})


def _verlet(force, r, v, t0, dt, steps, mass, interp, strict, provenance, meta, single):
    escaped = np.zeros(r.shape[0], dtype=bool)
    a = force(t0, r) / mass
    ts, pos, vel = [t0], [r.copy()], [v.copy()]
    t = t0
    for n in range(steps):
        v_half = v + 0.5 * dt * a
        new = r + dt * v_half
        out = interp.outside(new)
        if out.any():
            if strict:
                raise EscapeError(f"trajectory left the domain at t={t + dt:.6g}")
            escaped |= out
            new[out] = r[out]
            v_half[out] = 0.0
        r = new
        t = t0 + (n + 1) * dt
        a = force(t, r) / mass
        a[escaped] = 0.0
        v = v_half + 0.5 * dt * a
        ts.append(t)
        pos.append(r.copy())
        vel.append(v.copy())
    return _finish(ts, pos, vel, provenance, single, escaped, meta)


def newton_effective(U_ef_series, grid: Grid, r0, v0, dt: float, duration: float, times=None,
                     consts: PhysicalConstants = DEFAULT_CONSTANTS, strict: bool = True) -> TrajectorySample:
    """Velocity Verlet for m r'' = -grad U_ef, U_ef static or a time series."""
    U = _as_series(U_ef_series, times)
    masses = np.array(consts.axis_masses(grid.dims))
    grad = _gradient_frames(U, grid, [1.0] * grid.dims)
    interp = FieldInterpolator(grid)
    r, single = _batch(r0, grid.dims)
    v = np.broadcast_to(np.asarray(v0, dtype=float), r.shape).copy()
    steps = int(round(duration / dt))
    t0 = 0.0 if U.static else U.times[0]

    def force(t, x):
        return -interp(grad.at(t), x).T

    return _verlet(force, r, v, t0, dt, steps, masses, interp, strict, "newton_effective", {"dt": dt}, single)


def newton_true(U, log_rho, omega: float, grid: Grid, r0, v0, dt_fast: float, duration: float,
                times=None, consts: PhysicalConstants = DEFAULT_CONSTANTS, min_substeps: int = 16,
                strict: bool = True) -> TrajectorySample:
    """Velocity Verlet against an oscillating potential resolved at dt_fast.

    log_rho: ln rho (static or series) giving U_ref = U - (hbar omega/sqrt2) cos(omega t) ln rho,
    or an OscillatingForceSpec adding f_c cos(omega t) + f_s sin(omega t) with fixed amplitudes.
    """
    if not omega > 0:
        raise ValueError("omega must be positive")
    if dt_fast > 2 * np.pi / (omega * min_substeps) * (1 + 1e-12):
        raise ResolutionError(f"dt_fast must resolve omega with at least {min_substeps} steps per period")
    masses = np.array(consts.axis_masses(grid.dims))
    static = np.asarray(potential_values(U, grid, consts), dtype=float)
    grad_U = np.stack([derivative(static, grid, i, 1) for i in range(grid.dims)])
    interp = FieldInterpolator(grid)
    if isinstance(log_rho, OscillatingForceSpec):
        fc = np.stack(log_rho.f_c.components)
        fs = np.stack(log_rho.f_s.components)

        def force(t, x):
            f = -grad_U + np.cos(omega * t) * fc + np.sin(omega * t) * fs
            return interp(f, x).T
    else:
        L = _as_series(log_rho, times)
        grad_L = _gradient_frames(L, grid, [1.0] * grid.dims)
        amp = consts.hbar * omega / SQRT2

        def force(t, x):
            f = -grad_U + amp * np.cos(omega * t) * grad_L.at(t)
            return interp(f, x).T

    r, single = _batch(r0, grid.dims)
    v = np.broadcast_to(np.asarray(v0, dtype=float), r.shape).copy()
    steps = int(round(duration / dt_fast))
    return _verlet(force, r, v, 0.0, dt_fast, steps, masses, interp, strict, "newton_true",
                   {"dt": dt_fast, "omega": omega}, single)


def oscillation_amplitude(sample: TrajectorySample, omega: float, axis: int = 0) -> float:
    """Half peak-to-peak of position minus its one-period running mean, over interior windows."""
    tc, avg = sample.cycle_averaged(omega)
    pos = sample.positions
    dt = sample.times[1] - sample.times[0]
    K = int(round(2 * np.pi / (omega * dt)))
    centred = pos[K // 2:K // 2 + len(tc)] - avg
    c = centred[..., axis]
    return float(0.5 * (np.max(c) - np.min(c)))


def write_trajectory_csv(path, sample: TrajectorySample):
    """Columns t, x0.., v0.., provenance; batched samples get a particle column."""
    path = Path(path)
    pos, vel = sample.positions, sample.velocities
    batched = pos.ndim == 3
    d = pos.shape[-1]
    header = (["t"] + (["particle"] if batched else []) + [f"x{i}" for i in range(d)]
              + [f"v{i}" for i in range(d)] + ["provenance"])
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for n, t in enumerate(sample.times):
            rows = range(pos.shape[1]) if batched else [None]
            for p in rows:
                x = pos[n, p] if batched else pos[n]
                v = vel[n, p] if batched else vel[n]
                w.writerow([repr(float(t))] + ([p] if batched else []) + [repr(float(a)) for a in x]
                           + [repr(float(a)) for a in v] + [sample.provenance])
    return path


def read_trajectory_csv(path) -> TrajectorySample:
    with Path(path).open() as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    d = sum(1 for h in header if h.startswith("x"))
    batched = "particle" in header
    off = 2 if batched else 1
    data = np.array([[float(c) for c in r[:-1]] for r in body])
    times = np.unique(data[:, 0])
    if batched:
        M = int(data[:, 1].max()) + 1
        data = data.reshape(len(times), M, -1)
        pos, vel = data[..., off:off + d], data[..., off + d:off + 2 * d]
    else:
        pos, vel = data[:, off:off + d], data[:, off + d:off + 2 * d]
    return TrajectorySample(times, pos, vel, body[0][-1])
