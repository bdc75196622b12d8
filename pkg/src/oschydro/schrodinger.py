"""Reference Schrödinger solvers and the ψ <-> (ρ, S) bridge.

Split-step Fourier (Strang) is the default ground truth on periodic grids.
Crank-Nicolson on second-order differences covers dirichlet boxes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import expm
from scipy.sparse.linalg import LinearOperator, expm_multiply, splu

from .grid import (DIRICHLET, PERIODIC, Grid, PhysicalConstants, ScalarField, VectorField,
                   Wavefunction, derivative, integrate_values)

DEFAULT_CONSTANTS = PhysicalConstants()


class NodeError(ValueError):
    """The density drops below the floor where a phase must be unwrapped."""


class SchemeError(ValueError):
    pass


@dataclass(frozen=True)
class PotentialSpec:
    """Named external potential; `evaluate` samples it on a grid.

    kinds: free, harmonic(omega0, center), periodic_harmonic(omega0), box,
    barrier(height, width, edge), gaussian_well(depth, width, center),
    pair_gaussian(strength, width), tabulated(values), sum(parts).
    """
    kind: str = "free"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in _POTENTIALS:
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.kind in ("harmonic", "periodic_harmonic") and not self.params.get("omega0", 0) > 0:
            raise ValueError("harmonic potential needs omega0 > 0")

    def evaluate(self, grid: Grid, consts: PhysicalConstants = DEFAULT_CONSTANTS) -> ScalarField:
        return ScalarField(grid, _POTENTIALS[self.kind](grid, consts, **self.params))

    @classmethod
    def tabulated(cls, values) -> "PotentialSpec":
        return cls("tabulated", {"values": np.asarray(values, dtype=float)})

    def is_free(self) -> bool:
        return self.kind == "free"


def _free(grid, consts):
    return grid.zeros()


def _harmonic(grid, consts, omega0, center=None):
    center = np.zeros(grid.dims) if center is None else np.atleast_1d(center)
    masses = consts.axis_masses(grid.dims)
    return sum(0.5 * m * omega0 ** 2 * (X - c) ** 2 for X, c, m in zip(grid.mesh(), center, masses))


def periodic_harmonic_kappa(grid, consts, omega0, axis=0):
    k = 2 * np.pi / grid.extents[axis]
    m = consts.axis_masses(grid.dims)[axis]
    return 2 * m * omega0 / (consts.hbar * k * k), k


def _periodic_harmonic(grid, consts, omega0):
    # Smooth periodic well whose exact ground state is rho ~ exp(kappa cos kx),
    # harmonic with frequency omega0 at the bottom (plus a k^2 correction).
    out = grid.zeros()
    masses = consts.axis_masses(grid.dims)
    for i, X in enumerate(grid.mesh()):
        kappa, k = periodic_harmonic_kappa(grid, consts, omega0, i)
        c = consts.hbar ** 2 / (2 * masses[i])
        out = out + c * (0.25 * kappa ** 2 * k ** 2 * np.sin(k * X) ** 2
                         + 0.5 * kappa * k ** 2 * (1 - np.cos(k * X)))
    return out


def _box(grid, consts):
    if DIRICHLET not in grid.boundary:
        raise ValueError("box potential relies on dirichlet walls")
    return grid.zeros()


def _barrier(grid, consts, height, width, edge=0.0, center=0.0):
    x = grid.mesh()[0] - center
    if edge > 0:
        return 0.5 * height * (np.tanh((x + width / 2) / edge) - np.tanh((x - width / 2) / edge))
    return np.where(np.abs(x) < width / 2, float(height), 0.0)


def _gaussian_well(grid, consts, depth, width, center=None):
    return -depth * np.exp(-grid.radius_squared(center) / (2 * width ** 2))


def _pair_gaussian(grid, consts, strength, width):
    if grid.dims != 2:
        raise ValueError("pair interaction lives on a 2-axis configuration grid")
    X1, X2 = grid.mesh()
    return strength * np.exp(-(X1 - X2) ** 2 / (2 * width ** 2))


def _tabulated(grid, consts, values):
    v = np.asarray(values, dtype=float)
    if v.shape != grid.shape:
        raise ValueError("tabulated potential does not match grid")
    return v


def _sum(grid, consts, parts):
    return sum(p.evaluate(grid, consts).values for p in parts)


_POTENTIALS = {"free": _free, "harmonic": _harmonic, "periodic_harmonic": _periodic_harmonic,
               "box": _box, "barrier": _barrier, "gaussian_well": _gaussian_well,
               "pair_gaussian": _pair_gaussian, "tabulated": _tabulated, "sum": _sum}


def potential_values(U, grid, consts) -> np.ndarray:
    if U is None:
        return grid.zeros()
    if isinstance(U, PotentialSpec):
        return U.evaluate(grid, consts).values
    if isinstance(U, ScalarField):
        if U.grid != grid:
            raise ValueError("potential lives on a different grid")
        return U.values
    return np.broadcast_to(np.asarray(U, dtype=float), grid.shape)


@dataclass(frozen=True)
class EMPotentialSpec:
    """Vector potential A and scalar potential phi.

    A may be a VectorField, a callable t -> VectorField, or None (A = 0).
    """
    phi: object = None
    A: object = None

    def vector_potential(self, grid, t=0.0):
        A = self.A(t) if callable(self.A) else self.A
        if A is None:
            return None
        if isinstance(A, VectorField):
            if A.grid != grid:
                raise ValueError("vector potential lives on a different grid")
            return A.components
        comps = tuple(np.broadcast_to(np.asarray(a, dtype=float), grid.shape) for a in A)
        if len(comps) != grid.dims:
            raise ValueError("vector potential needs one component per axis")
        return comps

    def scalar_potential(self, grid, consts=DEFAULT_CONSTANTS):
        return potential_values(self.phi, grid, consts)

    def electric_field(self, grid, t=0.0, dt=1e-6):
        phi = self.scalar_potential(grid)
        grad = [derivative(phi, grid, i) for i in range(grid.dims)]
        if callable(self.A):
            a1, a0 = self.vector_potential(grid, t + dt), self.vector_potential(grid, t - dt)
            dA = [(p - q) / (2 * dt) for p, q in zip(a1, a0)]
        else:
            dA = [0.0] * grid.dims
        c = DEFAULT_CONSTANTS.light_speed
        return VectorField(grid, tuple(-g - d / c for g, d in zip(grad, dA)))

    def magnetic_field(self, grid, t=0.0):
        """rot A; for a 2D grid only the out-of-plane component exists."""
        A = self.vector_potential(grid, t)
        if A is None or grid.dims == 1:
            return grid.zeros()
        if grid.dims == 2:
            return derivative(A[1], grid, 0) - derivative(A[0], grid, 1)
        raise ValueError("magnetic field implemented for 1D/2D grids")


def vector_potential_is_zero(A) -> bool:
    return A is None or all(not np.any(a) for a in A)


def _is_uniform(A) -> bool:
    return all(np.all(a == a.flat[0]) for a in A)


# --------------------------------------------------------------- propagators

class SplitStepPropagator:
    """Strang splitting: half potential kick, exact kinetic drift in Fourier space, half kick."""

    def __init__(self, grid, U_values, dt, consts=DEFAULT_CONSTANTS, kinetic_shift=None):
        if not grid.all_periodic:
            raise SchemeError("split-step requires an all-periodic grid")
        self.grid = grid
        hbar = consts.hbar
        masses = consts.axis_masses(grid.dims)
        K = grid.wavenumber_mesh()
        shift = kinetic_shift if kinetic_shift is not None else (0.0,) * grid.dims
        kinetic = sum((hbar * k - s) ** 2 / (2 * m) for k, s, m in zip(K, shift, masses))
        self.half_kick = np.exp(-0.5j * dt * np.asarray(U_values) / hbar)
        self.drift = np.exp(-1j * dt * kinetic / hbar)

    def step(self, psi):
        psi = self.half_kick * psi
        psi = np.fft.ifftn(self.drift * np.fft.fftn(psi))
        return self.half_kick * psi


class CrankNicolsonPropagator:
    """Crank-Nicolson with the 3-point Laplacian; boundary samples pinned to zero."""

    def __init__(self, grid, U_values, dt, consts=DEFAULT_CONSTANTS):
        if grid.all_periodic:
            raise SchemeError("implicit-difference scheme is for dirichlet boxes")
        hbar = consts.hbar
        if dt * np.max(np.abs(U_values)) / hbar > np.pi:
            raise SchemeError("dt too large: potential phase per step exceeds pi")
        masses = consts.axis_masses(grid.dims)
        ops = []
        for i in range(grid.dims):
            n, h = grid.points[i], grid.spacing[i]
            lap = sp.diags([np.ones(n - 1), -2 * np.ones(n), np.ones(n - 1)], [-1, 0, 1], format="lil")
            if grid.boundary[i] == PERIODIC:
                lap[0, n - 1] = lap[n - 1, 0] = 1.0
            lap = lap.tocsr() / h ** 2
            eye_before = sp.identity(int(np.prod(grid.points[:i])))
            eye_after = sp.identity(int(np.prod(grid.points[i + 1:])))
            ops.append(-(hbar ** 2 / (2 * masses[i])) * sp.kron(sp.kron(eye_before, lap), eye_after))
        H = sum(ops) + sp.diags(np.asarray(U_values).reshape(-1))
        mask = np.ones(grid.shape, dtype=bool)
        for i in range(grid.dims):
            if grid.boundary[i] == DIRICHLET:
                idx = [slice(None)] * grid.dims
                idx[i] = [0, -1]
                mask[tuple(idx)] = False
        self.mask = mask.reshape(-1)
        keep = np.flatnonzero(self.mask)
        H = H.tocsr()[keep][:, keep]
        eye = sp.identity(len(keep), format="csc")
        self.lhs = splu((eye + 0.5j * dt / hbar * H).tocsc())
        self.rhs = (eye - 0.5j * dt / hbar * H).tocsr()
        self.shape = grid.shape

    def step(self, psi):
        flat = psi.reshape(-1)
        out = np.zeros_like(flat)
        out[self.mask] = self.lhs.solve(self.rhs @ flat[self.mask])
        return out.reshape(self.shape)


class ExponentialEMPropagator:
    """Exact-exponential step for the minimal-coupling Hamiltonian with a non-uniform A.

    Small grids build the dense propagator once; larger grids use a Krylov action.
    """

    dense_limit = 2048

    def __init__(self, grid, A, phi, dt, consts=DEFAULT_CONSTANTS):
        if not grid.all_periodic:
            raise SchemeError("electromagnetic solver needs periodic axes")
        self.grid, self.A, self.phi, self.dt, self.c = grid, A, phi, dt, consts
        n = int(np.prod(grid.shape))
        self.matrix = None
        if n <= self.dense_limit:
            H = np.empty((n, n), dtype=complex)
            basis = np.zeros(n, dtype=complex)
            for j in range(n):
                basis[j] = 1.0
                H[:, j] = self.hamiltonian(basis.reshape(grid.shape)).reshape(-1)
                basis[j] = 0.0
            H = 0.5 * (H + H.conj().T)
            self.matrix = expm(-1j * dt / consts.hbar * H)
        else:
            self.op = LinearOperator((n, n), matvec=self._apply, rmatvec=lambda v: -self._apply(v),
                                     dtype=complex)

    def hamiltonian(self, psi):
        c = self.c
        hbar, q, light = c.hbar, c.charge, c.light_speed
        out = self.phi * psi * q
        for i, m in enumerate(c.axis_masses(self.grid.dims)):
            a = q * self.A[i] / light
            d = lambda f: derivative(f, self.grid, i, 1)
            out = out + (-hbar ** 2 * derivative(psi, self.grid, i, 2)
                         + 1j * hbar * (d(a * psi) + a * d(psi)) + a * a * psi) / (2 * m)
        return out

    def _apply(self, v):
        psi = np.asarray(v).reshape(self.grid.shape)
        return (-1j * self.dt / self.c.hbar * self.hamiltonian(psi)).reshape(-1)

    def step(self, psi):
        if self.matrix is not None:
            return (self.matrix @ psi.reshape(-1)).reshape(self.grid.shape)
        return expm_multiply(self.op, psi.reshape(-1), traceA=0.0).reshape(self.grid.shape)


def make_propagator(grid, U_values, dt, consts=DEFAULT_CONSTANTS, scheme="split-step"):
    if scheme == "split-step":
        return SplitStepPropagator(grid, U_values, dt, consts)
    if scheme == "implicit-difference":
        return CrankNicolsonPropagator(grid, U_values, dt, consts)
    raise SchemeError(f"unknown scheme {scheme!r}")


def _run(prop, psi, steps, record_every, dt):
    frames, times = [], []
    if record_every:
        frames.append(psi.copy())
        times.append(0.0)
    for n in range(1, steps + 1):
        psi = prop.step(psi)
        if record_every and n % record_every == 0:
            frames.append(psi.copy())
            times.append(n * dt)
    return psi, np.array(times), frames


def evolve_schrodinger(psi0: Wavefunction, U, dt: float, steps: int, scheme: str = "split-step",
                       consts: PhysicalConstants = DEFAULT_CONSTANTS, record_every: int = 0):
    """Advance psi0 by `steps` steps of size dt.

    Returns the final Wavefunction, or (times, frames) when record_every > 0.
    """
    grid = psi0.grid
    prop = make_propagator(grid, potential_values(U, grid, consts), dt, consts, scheme)
    psi, times, frames = _run(prop, psi0.values, steps, record_every, dt)
    if record_every:
        return times, [Wavefunction(grid, f) for f in frames]
    return Wavefunction(grid, psi)


def evolve_schrodinger_em(psi0: Wavefunction, em: EMPotentialSpec, dt: float, steps: int,
                          consts: PhysicalConstants = DEFAULT_CONSTANTS, record_every: int = 0):
    """Minimal-coupling evolution. A = 0 defers to the scalar split-step path with U = q*phi."""
    grid = psi0.grid
    if grid.dims > 2:
        raise ValueError("electromagnetic solver supports 1D and 2D grids")
    phi = em.scalar_potential(grid, consts)
    A = em.vector_potential(grid, 0.0)
    if callable(em.A):
        raise NotImplementedError("time-dependent vector potentials are not supported by the reference solver")
    if vector_potential_is_zero(A):
        return evolve_schrodinger(psi0, ScalarField(grid, consts.charge * phi), dt, steps,
                                  consts=consts, record_every=record_every)
    if _is_uniform(A):
        shift = tuple(consts.charge * a.flat[0] / consts.light_speed for a in A)
        prop = SplitStepPropagator(grid, consts.charge * phi, dt, consts, kinetic_shift=shift)
    else:
        prop = ExponentialEMPropagator(grid, A, phi, dt, consts)
    psi, times, frames = _run(prop, psi0.values, steps, record_every, dt)
    if record_every:
        return times, [Wavefunction(grid, f) for f in frames]
    return Wavefunction(grid, psi)


def evolve_schrodinger_many(psi0: Wavefunction, U, masses, dt: float, steps: int,
                            hbar: float = 1.0, record_every: int = 0):
    """Two 1D particles on a 2-axis configuration grid, one mass per axis."""
    if psi0.grid.dims != 2:
        raise ValueError("configuration grid must have exactly 2 axes")
    consts = PhysicalConstants(hbar=hbar, mass=tuple(masses))
    return evolve_schrodinger(psi0, U, dt, steps, consts=consts, record_every=record_every)


def energy(psi: Wavefunction, U, consts: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    grid = psi.grid
    Uv = potential_values(U, grid, consts)
    masses = consts.axis_masses(grid.dims)
    kinetic = sum(consts.hbar ** 2 * np.abs(derivative(psi.values, grid, i)) ** 2 / (2 * m)
                  for i, m in enumerate(masses))
    return float(integrate_values(grid, kinetic + Uv * psi.density))


# ------------------------------------------------------------------- Madelung

def default_floor(rho) -> float:
    return 1e-12 * float(np.max(rho))


def _unwrap_outward(phase, axis, i0):
    n = phase.shape[axis]
    fwd = np.unwrap(np.take(phase, np.arange(i0, n), axis=axis), axis=axis)
    bwd = np.unwrap(np.take(phase, np.arange(i0, -1, -1), axis=axis), axis=axis)
    bwd = np.flip(bwd, axis=axis)
    return np.concatenate([np.take(bwd, np.arange(i0), axis=axis), fwd], axis=axis)


def _unwrap_anchored(phase, anchor):
    """Unwrap along the last axis everywhere, then fix line offsets using the anchor hyperplane."""
    if phase.ndim == 1:
        return _unwrap_outward(phase, 0, anchor[0])
    out = _unwrap_outward(phase, phase.ndim - 1, anchor[-1])
    plane = np.take(out, anchor[-1], axis=phase.ndim - 1)
    fixed = _unwrap_anchored(plane, anchor[:-1])
    return out + np.expand_dims(fixed - plane, axis=phase.ndim - 1)


def madelung_decompose(psi: Wavefunction, rho_floor: float = None, region=None, anchor=None,
                       consts: PhysicalConstants = DEFAULT_CONSTANTS):
    """Split psi into (rho, S) with S = hbar * phase unwrapped from the density maximum.

    `region` (boolean mask) limits where S is requested; S is set to 0 outside it.
    """
    grid = psi.grid
    rho = psi.density
    floor = default_floor(rho) if rho_floor is None else rho_floor
    req = np.ones(grid.shape, dtype=bool) if region is None else np.asarray(region, dtype=bool)
    if anchor is None:
        anchor = np.unravel_index(np.argmax(np.where(req, rho, -1.0)), grid.shape)
    low = req & (rho < floor)
    if low.any():
        where = tuple(int(i) for i in np.argwhere(low)[0])
        raise NodeError(f"density {rho[where]:.3e} below floor {floor:.3e} at index {where}")
    phase = np.angle(psi.values)
    S = consts.hbar * _unwrap_anchored(phase, tuple(anchor))
    S = np.where(req, S, 0.0)
    return ScalarField(grid, rho), ScalarField(grid, S)


def madelung_decompose_series(frames, rho_floor=None, region=None,
                              consts: PhysicalConstants = DEFAULT_CONSTANTS):
    """Decompose a time series with one fixed anchor and the anchor phase unwrapped in time."""
    first = frames[0]
    req = np.ones(first.grid.shape, dtype=bool) if region is None else region
    anchor = np.unravel_index(np.argmax(np.where(req, first.density, -1.0)), first.grid.shape)
    rhos, Ss = [], []
    prev = None
    for f in frames:
        rho, S = madelung_decompose(f, rho_floor, region, anchor, consts)
        s = S.values
        if prev is not None:
            jump = 2 * np.pi * consts.hbar
            s = s + jump * np.round((prev[anchor] - s[anchor]) / jump)
        prev = s
        rhos.append(rho.values)
        Ss.append(s)
    return np.array(rhos), np.array(Ss)


def madelung_compose(rho: ScalarField, S: ScalarField,
                     consts: PhysicalConstants = DEFAULT_CONSTANTS) -> Wavefunction:
    if rho.grid != S.grid:
        raise ValueError("rho and S live on different grids")
    if np.any(rho.values < 0):
        raise ValueError("negative density cannot be composed into a wavefunction")
    return Wavefunction(rho.grid, np.sqrt(rho.values) * np.exp(1j * S.values / consts.hbar))
