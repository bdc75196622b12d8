"""Oscillation-resolving hydrodynamics: the true fields (rho_r, S_r) under a sign-alternating pressure.

The density is advanced as eta = ln rho_r. With v = (grad S_r - qA/c)/m the system is

    dS_r/dt = -m|v|^2/2 - U + (hbar*omega/sqrt2) cos(omega t) eta
    deta/dt = -(v . grad eta + div v)

which is the continuity equation divided by rho_r. Positivity is then structural and
the pressure term needs no floor. Each RK4 step is followed by a high-order
exponential filter and a uniform shift of eta that restores unit mass.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import (Grid, PhysicalConstants, ScalarField, VectorField, Wavefunction, curl_2d,
                   derivative, gradient_values, integrate_values, write_snapshot)
from .schrodinger import (DEFAULT_CONSTANTS, EMPotentialSpec, default_floor, madelung_decompose,
                          potential_values)

SQRT2 = np.sqrt(2.0)


class CFLViolation(RuntimeError):
    pass


class FloorViolation(RuntimeError):
    pass


class NonFiniteState(FloatingPointError):
    pass


class HydroRunError(RuntimeError):
    """A run failed; `partial` holds everything recorded before the failure."""

    def __init__(self, message, partial):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class OscillationConfig:
    omega: float
    substeps_per_period: int = 32
    seed_fast: bool = True
    oscillating_term: bool = True
    filter_strength: float = 1.0   # cutoff k_c^2 = filter_strength * m * omega / hbar
    filter_order: int = 16
    rho_floor: float = None

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError("omega must be positive")
        if self.substeps_per_period < 16:
            raise ValueError("need at least 16 substeps per fast period")
        if self.filter_strength is not None and self.filter_strength <= 0:
            raise ValueError("filter_strength must be positive or None")

    @property
    def period(self) -> float:
        return 2 * np.pi / self.omega

    @property
    def dt(self) -> float:
        return self.period / self.substeps_per_period

    def periods_in(self, duration: float) -> int:
        return int(round(duration / self.period))


@dataclass(frozen=True)
class PressureLaw:
    hbar: float
    omega: float
    boltzmann: float = 1.0

    def pressure(self, rho_r, t):
        return -self.hbar * self.omega / SQRT2 * np.asarray(rho_r) * np.cos(self.omega * t)

    def temperature(self, t):
        return -self.hbar * self.omega / (SQRT2 * self.boltzmann) * np.cos(self.omega * t)


@dataclass(frozen=True)
class HydroState:
    rho_r: ScalarField
    S_r: ScalarField
    t: float = 0.0

    @property
    def grid(self) -> Grid:
        return self.rho_r.grid

    def velocity(self, consts=DEFAULT_CONSTANTS, A=None) -> VectorField:
        grid = self.grid
        masses = consts.axis_masses(grid.dims)
        grads = gradient_values(self.S_r.values, grid)
        comps = []
        for i, (g, m) in enumerate(zip(grads, masses)):
            a = 0.0 if A is None else consts.charge * A[i] / consts.light_speed
            comps.append((g - a) / m)
        return VectorField(grid, tuple(comps))


class _Spectral:
    """rfft-based derivative helpers for real periodic fields."""

    def __init__(self, grid: Grid, masses):
        if not grid.all_periodic:
            raise ValueError("the oscillating solver needs periodic axes (ln rho_r must be smooth and periodic)")
        self.grid = grid
        self.axes = tuple(range(grid.dims))
        ks = []
        for i in range(grid.dims):
            n = grid.points[i]
            if i == grid.dims - 1:
                k = 2 * np.pi * np.fft.rfftfreq(n, d=grid.spacing[i])
            else:
                k = grid.wavenumbers(i)
            ks.append(k)
        self.k = [np.reshape(k, [-1 if j == i else 1 for j in range(grid.dims)]) for i, k in enumerate(ks)]
        self.ik = []
        for i, k in enumerate(self.k):
            ik = 1j * k.copy()
            n = grid.points[i]
            if n % 2 == 0:
                idx = [slice(None)] * grid.dims
                idx[i] = n // 2
                ik = np.broadcast_to(ik, ik.shape).copy()
                ik[tuple(idx)] = 0.0
            self.ik.append(ik)
        self.neg_k2_over_m = sum(-(k ** 2) / m for k, m in zip(self.k, masses))

    def fwd(self, f):
        return np.fft.rfftn(f, axes=self.axes)

    def inv(self, F):
        return np.fft.irfftn(F, s=self.grid.shape, axes=self.axes)

    def grad(self, F):
        return [self.inv(ik * F) for ik in self.ik]


class OscillatingHydroSolver:
    """RK4 integrator of the true system on a periodic grid (scalar, EM or configuration space)."""

    def __init__(self, grid: Grid, osc: OscillationConfig, consts: PhysicalConstants = DEFAULT_CONSTANTS,
                 U=None, A=None):
        self.grid, self.osc, self.consts = grid, osc, consts
        self.masses = consts.axis_masses(grid.dims)
        self.spec = _Spectral(grid, self.masses)
        self.U = np.array(potential_values(U, grid, consts), dtype=float)
        q_over_c = consts.charge / consts.light_speed
        if A is None:
            A = tuple(grid.zeros() for _ in range(grid.dims))
        self.qA = [q_over_c * np.asarray(a, dtype=float) for a in A]
        self.div_qA_over_m = sum(self.spec.inv(ik * self.spec.fwd(a)) / m
                                 for ik, a, m in zip(self.spec.ik, self.qA, self.masses))
        self.pressure_coef = consts.hbar * osc.omega / SQRT2 if osc.oscillating_term else 0.0
        self.filter = self._build_filter()
        self.cell = grid.cell_volume

    def _build_filter(self):
        osc, grid = self.osc, self.grid
        if osc.filter_strength is None:
            return None
        filt = np.ones(self.spec.neg_k2_over_m.shape)
        for i, (k, m) in enumerate(zip(self.spec.k, self.masses)):
            k_nyq = np.pi / grid.spacing[i]
            kc = min(np.sqrt(osc.filter_strength * m * osc.omega / self.consts.hbar), 2.0 / 3.0 * k_nyq)
            filt = filt * np.exp(-36.0 * (np.abs(k) / kc) ** osc.filter_order)
        return filt

    # -- right-hand side
    def velocity(self, S):
        return [(g - qa) / m for g, qa, m in zip(self.spec.grad(self.spec.fwd(S)), self.qA, self.masses)]

    def rhs(self, t, eta, S):
        sp = self.spec
        FS = sp.fwd(S)
        grad_S = sp.grad(FS)
        v = [(g - qa) / m for g, qa, m in zip(grad_S, self.qA, self.masses)]
        div_v = sp.inv(sp.neg_k2_over_m * FS) - self.div_qA_over_m
        grad_eta = sp.grad(sp.fwd(eta))
        d_eta = -(sum(vi * ge for vi, ge in zip(v, grad_eta)) + div_v)
        kinetic = sum(0.5 * m * vi * vi for vi, m in zip(v, self.masses))
        d_S = -kinetic - self.U + self.pressure_coef * np.cos(self.osc.omega * t) * eta
        return d_eta, d_S

    def _filtered(self, f):
        if self.filter is None:
            return f
        return self.spec.inv(self.filter * self.spec.fwd(f))

    def _renormalize(self, eta):
        return eta - np.log(np.sum(np.exp(eta)) * self.cell)

    def rk4(self, t, eta, S, dt):
        a1, b1 = self.rhs(t, eta, S)
        a2, b2 = self.rhs(t + dt / 2, eta + dt / 2 * a1, S + dt / 2 * b1)
        a3, b3 = self.rhs(t + dt / 2, eta + dt / 2 * a2, S + dt / 2 * b2)
        a4, b4 = self.rhs(t + dt, eta + dt * a3, S + dt * b3)
        eta = eta + dt / 6 * (a1 + 2 * a2 + 2 * a3 + a4)
        S = S + dt / 6 * (b1 + 2 * b2 + 2 * b3 + b4)
        return self._renormalize(self._filtered(eta)), self._filtered(S)

    def check_cfl(self, S, dt):
        v = self.velocity(S)
        for i, vi in enumerate(v):
            if dt * np.max(np.abs(vi)) > 0.5 * self.grid.spacing[i]:
                raise CFLViolation(f"dt*max|v| = {dt * np.max(np.abs(vi)):.3e} exceeds half the spacing on axis {i}")

    def step(self, t, eta, S, dt, floor):
        """One accepted step; a floor violation is retried once with two half steps."""
        self.check_cfl(S, dt)
        new_eta, new_S = self.rk4(t, eta, S, dt)
        if not (np.all(np.isfinite(new_eta)) and np.all(np.isfinite(new_S))):
            raise NonFiniteState(f"non-finite fields after step at t={t + dt:.6g}")
        if floor is not None and np.min(new_eta) < np.log(floor):
            half_eta, half_S = self.rk4(t, eta, S, dt / 2)
            new_eta, new_S = self.rk4(t + dt / 2, half_eta, half_S, dt / 2)
            if not np.all(np.isfinite(new_eta)) or np.min(new_eta) < np.log(floor):
                where = tuple(int(i) for i in np.unravel_index(np.argmin(new_eta), eta.shape))
                raise FloorViolation(f"rho_r fell below floor {floor:.3e} at index {where}, t={t + dt:.6g}")
        return new_eta, new_S

    # -- diagnostics
    def energy(self, eta, S):
        v = self.velocity(S)
        rho = np.exp(eta)
        e = sum(0.5 * m * vi * vi for vi, m in zip(v, self.masses)) + self.U
        return float(np.sum(rho * e) * self.cell)

    def term_ratio(self, t, eta, S):
        """RMS of the convective term over RMS of the oscillating pressure term at time t."""
        v = self.velocity(S)
        conv = sum(0.5 * m * vi * vi for vi, m in zip(v, self.masses))
        osc = self.pressure_coef * np.cos(self.osc.omega * t) * eta
        den = np.sqrt(np.mean(osc ** 2))
        return float(np.sqrt(np.mean(conv ** 2)) / den) if den > 0 else float("inf")


# ------------------------------------------------------------------ public ops

def _as_array(f, grid):
    return f.values if isinstance(f, ScalarField) else np.asarray(f, dtype=float)


def seed_fast_components(rho: ScalarField, t0: float, osc: OscillationConfig,
                         consts: PhysicalConstants = DEFAULT_CONSTANTS, masses=None):
    """Analytic fast components at t0: sigma ~ sin(omega t0) ln rho, zeta ~ cos(omega t0) * sum_k lap_k rho / m_k."""
    grid = rho.grid
    if masses is not None:
        consts = PhysicalConstants(consts.hbar, tuple(masses), consts.charge, consts.light_speed)
    floor = default_floor(rho.values) if osc.rho_floor is None else osc.rho_floor
    if np.min(rho.values) < floor:
        raise FloorViolation("density below floor while seeding fast components")
    w, hbar = osc.omega, consts.hbar
    sigma = hbar / SQRT2 * np.sin(w * t0) * np.log(rho.values)
    lap_over_m = sum(derivative(rho.values, grid, i, 2) / m
                     for i, m in enumerate(consts.axis_masses(grid.dims)))
    zeta = hbar / (SQRT2 * w) * np.cos(w * t0) * lap_over_m
    return ScalarField(grid, sigma), ScalarField(grid, zeta)


def _state_to_arrays(state: HydroState):
    rho = state.rho_r.values
    if np.any(rho <= 0):
        raise FloorViolation("rho_r must be strictly positive for the log-density solver")
    return np.log(rho), state.S_r.values.copy()


def _arrays_to_state(grid, eta, S, t):
    return HydroState(ScalarField(grid, np.exp(eta)), ScalarField(grid, S), t)


def _floor_for(osc, rho):
    return default_floor(rho) if osc.rho_floor is None else osc.rho_floor


def _advance(solver, state, dt):
    if dt > solver.osc.dt * (1 + 1e-12):
        raise ValueError("dt exceeds 2*pi/(omega*K)")
    eta, S = _state_to_arrays(state)
    eta, S = solver.step(state.t, eta, S, dt, _floor_for(solver.osc, state.rho_r.values))
    return _arrays_to_state(state.grid, eta, S, state.t + dt)


def hj_step(state: HydroState, U, osc: OscillationConfig, dt: float,
            consts: PhysicalConstants = DEFAULT_CONSTANTS) -> HydroState:
    return _advance(OscillatingHydroSolver(state.grid, osc, consts, U=U), state, dt)


def hj_step_em(state: HydroState, em: EMPotentialSpec, osc: OscillationConfig, dt: float,
               consts: PhysicalConstants = DEFAULT_CONSTANTS) -> HydroState:
    grid = state.grid
    U = consts.charge * em.scalar_potential(grid, consts)
    return _advance(OscillatingHydroSolver(grid, osc, consts, U=U, A=em.vector_potential(grid, state.t)),
                    state, dt)


def hj_step_many(state: HydroState, U, masses, osc: OscillationConfig, dt: float,
                 hbar: float = 1.0) -> HydroState:
    if state.grid.dims != 2:
        raise ValueError("configuration grid must have exactly 2 axes")
    consts = PhysicalConstants(hbar=hbar, mass=tuple(masses))
    return _advance(OscillatingHydroSolver(state.grid, osc, consts, U=U), state, dt)


@dataclass
class RunResult:
    grid: Grid
    osc: OscillationConfig
    consts: PhysicalConstants
    duration: float
    boundary_times: list = field(default_factory=list)   # t at each period boundary
    boundary_states: list = field(default_factory=list)  # HydroState at each boundary
    window_centers: list = field(default_factory=list)   # centre time of each one-period window
    averaged_rho: list = field(default_factory=list)     # one-period trapezoid average of rho_r
    averaged_S: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    sample_times: np.ndarray = None
    sample_rho: np.ndarray = None
    sample_S: np.ndarray = None
    status: str = "ok"

    @property
    def final_state(self) -> HydroState:
        return self.boundary_states[-1]

    def manifest(self) -> dict:
        return {"omega": self.osc.omega, "substeps_per_period": self.osc.substeps_per_period,
                "seed_fast": self.osc.seed_fast, "filter_strength": self.osc.filter_strength,
                "duration": self.duration, "periods": len(self.window_centers),
                "grid": self.grid.header(), "hbar": self.consts.hbar, "masses": list(self.consts.mass),
                "window_centers": list(map(float, self.window_centers)),
                "diagnostics": {k: list(map(float, v)) for k, v in self.diagnostics.items()},
                "status": self.status}


def initial_fields(initial, consts=DEFAULT_CONSTANTS):
    """Accept a Wavefunction or a (rho, S) pair and return (rho, S) ScalarFields."""
    if isinstance(initial, Wavefunction):
        return madelung_decompose(initial, consts=consts)
    rho, S = initial
    grid = rho.grid
    return rho, (S if isinstance(S, ScalarField) else ScalarField(grid, np.broadcast_to(S, grid.shape)))


def run(initial, osc: OscillationConfig, duration: float, U=None, em: EMPotentialSpec = None,
        consts: PhysicalConstants = DEFAULT_CONSTANTS, keep_samples: bool = False,
        out_dir=None, snapshot_mode: str = "csv") -> RunResult:
    """Integrate an integer number of fast periods and record one-period averages.

    The duration is rounded to a whole number of periods. With seed_fast the run starts
    from rho_r = rho + zeta, S_r = S + sigma.
    """
    rho, S = initial_fields(initial, consts)
    grid = rho.grid
    A = None
    if em is not None:
        if U is not None:
            raise ValueError("give either a scalar potential or an EM spec, not both")
        U = consts.charge * em.scalar_potential(grid, consts)
        A = em.vector_potential(grid, 0.0)
    solver = OscillatingHydroSolver(grid, osc, consts, U=U, A=A)
    if osc.seed_fast:
        sigma, zeta = seed_fast_components(rho, 0.0, osc, consts)
        rho_r, S_r = rho.values + zeta.values, S.values + sigma.values
    else:
        rho_r, S_r = rho.values.copy(), S.values.copy()
    floor = _floor_for(osc, rho.values)
    if np.min(rho_r) <= 0:
        raise FloorViolation("seeded rho_r is not positive; raise omega or smooth the initial state")
    eta = np.log(rho_r)
    eta = eta - np.log(np.sum(np.exp(eta)) * solver.cell)
    S_arr = S_r

    n_periods = osc.periods_in(duration)
    K, dt = osc.substeps_per_period, osc.dt
    res = RunResult(grid, osc, consts, n_periods * osc.period)
    diag = {k: [] for k in ("mass", "energy", "averaged_energy", "pressure_amplitude", "temperature",
                            "term_ratio", "curl")}
    res.diagnostics = diag
    law = PressureLaw(consts.hbar, osc.omega)
    res.boundary_times.append(0.0)
    res.boundary_states.append(_arrays_to_state(grid, eta, S_arr, 0.0))
    samples_t, samples_rho, samples_S = [], [], []
    t = 0.0
    try:
        for p in range(n_periods):
            acc_rho = 0.5 * np.exp(eta)
            acc_S = 0.5 * S_arr
            acc_E = 0.5 * solver.energy(eta, S_arr)
            ratios = []
            for j in range(K):
                if keep_samples:
                    samples_t.append(t)
                    samples_rho.append(np.exp(eta))
                    samples_S.append(S_arr.copy())
                ratios.append(solver.term_ratio(t, eta, S_arr))
                eta, S_arr = solver.step(t, eta, S_arr, dt, floor)
                t = (p * K + j + 1) * dt
                w = 0.5 if j == K - 1 else 1.0
                acc_rho = acc_rho + w * np.exp(eta)
                acc_S = acc_S + w * S_arr
                acc_E = acc_E + w * solver.energy(eta, S_arr)
            res.window_centers.append((p + 0.5) * osc.period)
            res.averaged_rho.append(acc_rho / K)
            res.averaged_S.append(acc_S / K)
            res.boundary_times.append(t)
            state = _arrays_to_state(grid, eta, S_arr, t)
            res.boundary_states.append(state)
            diag["mass"].append(integrate_values(grid, np.exp(eta)))
            diag["energy"].append(solver.energy(eta, S_arr))
            diag["averaged_energy"].append(acc_E / K)
            diag["pressure_amplitude"].append(float(law.pressure(1.0, 0.0)))
            diag["temperature"].append(float(law.temperature(t)))
            diag["term_ratio"].append(float(np.sqrt(np.mean(np.square(ratios)))))
            if grid.dims == 2:
                v = VectorField(grid, tuple(solver.velocity(S_arr)))
                diag["curl"].append(float(np.max(np.abs(curl_2d(v).values))))
    except Exception as exc:
        res.status = f"failed: {exc}"
        if out_dir is not None:
            write_run_outputs(res, out_dir, snapshot_mode)
        raise HydroRunError(str(exc), res) from exc
    if keep_samples:
        samples_t.append(t)
        samples_rho.append(np.exp(eta))
        samples_S.append(S_arr.copy())
        res.sample_times = np.array(samples_t)
        res.sample_rho = np.array(samples_rho)
        res.sample_S = np.array(samples_S)
    if out_dir is not None:
        write_run_outputs(res, out_dir, snapshot_mode)
    return res


def write_run_outputs(res: RunResult, out_dir, mode="csv"):
    """Per-period averaged-density snapshots plus a JSON manifest, written atomically."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    index = []
    ext = "csv" if mode == "csv" else "bin"
    for i, (tc, rho) in enumerate(zip(res.window_centers, res.averaged_rho)):
        path = out / f"avg_rho_{i:05d}.{ext}"
        write_snapshot(path, ScalarField(res.grid, rho), tc, mode)
        index.append({"time": float(tc), "file": path.name, "mode": mode})
    manifest = res.manifest()
    manifest["snapshots"] = index
    tmp = out / "run_manifest.json.tmp"
    tmp.write_text(json.dumps(manifest, indent=1))
    tmp.replace(out / "run_manifest.json")
    return out / "run_manifest.json"


def relative_l2(a, b) -> float:
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)) / np.linalg.norm(np.asarray(b)))
