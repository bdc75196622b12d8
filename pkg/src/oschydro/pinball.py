"""Classical particles scattered by randomly placed sources with an oscillating amplitude.

Each source is a unit-mass Gaussian kernel G_eps of width eps. The force on a particle is

    F = -grad U + a(t) sum_k grad G_eps(r - r_k),   a(t) = (-(hbar omega/sqrt2) cos(omega t) - tau) / n

so a n + tau reproduces the sign-alternating pressure coefficient. Sources live on a
periodic box; particle coordinates are kept unwrapped and folded only for source lookups.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter1d
from scipy.spatial import cKDTree

from .grid import Grid, PhysicalConstants, derivative
from .schrodinger import DEFAULT_CONSTANTS, potential_values
from .trajectories import FieldInterpolator

SQRT2 = np.sqrt(2.0)
KERNEL_REACH = 6.0


class SeparationError(ValueError):
    """Kernel width too large for the mean source spacing."""


class StepSizeError(ValueError):
    pass


@dataclass(frozen=True)
class DeltaSourceField:
    positions: np.ndarray       # (count, d)
    density: float              # n, sources per unit volume
    kernel_width: float         # eps
    extents: tuple              # periodic box lengths, centred on the origin
    omega: float = 1.0
    hbar: float = 1.0
    tau: float = 0.0
    seed: int = None

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError("tau must be non-negative")
        if self.density > 0:
            spacing = self.density ** (-1.0 / self.dims)
            if self.kernel_width > spacing / 3:
                raise SeparationError(f"kernel width {self.kernel_width} exceeds a third of the mean "
                                      f"spacing {spacing:.4g}")

    @property
    def dims(self) -> int:
        return len(self.extents)

    @property
    def count(self) -> int:
        return int(self.positions.shape[0])

    def amplitude(self, t):
        if self.density == 0:
            return 0.0 * np.asarray(t, dtype=float)
        return (-(self.hbar * self.omega / SQRT2) * np.cos(self.omega * t) - self.tau) / self.density

    def pressure_coefficient(self, t):
        """a(t) n + tau, the configured pressure-law coefficient."""
        return self.amplitude(t) * self.density + self.tau

    def manifest(self) -> dict:
        return {"density": self.density, "kernel_width": self.kernel_width, "tau": self.tau,
                "omega": self.omega, "hbar": self.hbar, "extents": list(self.extents),
                "count": self.count, "seed": self.seed}


def sample_sources(extents, density: float, kernel_width: float, seed: int, omega: float = 1.0,
                   hbar: float = 1.0, tau: float = 0.0) -> DeltaSourceField:
    """Homogeneous Poisson points on a periodic box [-L/2, L/2)^d."""
    extents = tuple(float(e) for e in np.atleast_1d(extents))
    rng = np.random.default_rng(seed)
    volume = float(np.prod(extents))
    count = rng.poisson(density * volume) if density > 0 else 0
    pos = (rng.random((count, len(extents))) - 0.5) * np.array(extents)
    return DeltaSourceField(pos, float(density), float(kernel_width), extents, omega, hbar, tau, seed)


def kernel(disp, eps):
    """Unit-mass Gaussian kernel evaluated at displacements (..., d)."""
    d = disp.shape[-1]
    r2 = np.sum(disp * disp, axis=-1)
    return np.exp(-r2 / (2 * eps * eps)) / (2 * np.pi * eps * eps) ** (d / 2)


def kernel_gradient(disp, eps):
    return -disp / (eps * eps) * kernel(disp, eps)[..., None]


class SourceLookup:
    """Neighbour search between particles and sources on the periodic source box."""

    def __init__(self, sources: DeltaSourceField):
        self.sources = sources
        self.box = np.array(sources.extents)
        self.reach = KERNEL_REACH * sources.kernel_width
        self.tree = cKDTree(self._fold(sources.positions), boxsize=self.box) if sources.count else None

    def _fold(self, r):
        # cKDTree wants coordinates in [0, L); keep a hair below L after the modulo
        out = np.mod(np.asarray(r) + self.box / 2, self.box)
        return np.where(out >= self.box, 0.0, out)

    def pairs(self, r):
        """(particle index, source index, displacement r - r_k under minimum image)."""
        if self.tree is None or len(r) == 0:
            return np.zeros(0, int), np.zeros(0, int), np.zeros((0, len(self.box)))
        ptree = cKDTree(self._fold(r), boxsize=self.box)
        coo = ptree.sparse_distance_matrix(self.tree, self.reach, output_type="ndarray")
        i, k = coo["i"].astype(int), coo["j"].astype(int)
        disp = r[i] - self.sources.positions[k]
        disp = disp - self.box * np.round(disp / self.box)
        return i, k, disp

    def source_sum(self, r):
        """sum_k grad G_eps(r - r_k) for every particle, plus the pair data."""
        i, k, disp = self.pairs(r)
        out = np.zeros_like(np.asarray(r, dtype=float))
        if len(i):
            np.add.at(out, i, kernel_gradient(disp, self.sources.kernel_width))
        return out, (i, k, disp)


class PotentialForce:
    """-grad U sampled by multilinear interpolation (None or zero potential gives no force)."""

    def __init__(self, U, grid: Grid = None, consts: PhysicalConstants = DEFAULT_CONSTANTS):
        self.grid = grid
        self.callable = callable(U) and not hasattr(U, "evaluate")
        self.zero = U is None
        if self.callable:
            self.fn = U
        elif not self.zero:
            if grid is None:
                raise ValueError("a lattice potential needs its grid")
            values = potential_values(U, grid, consts)
            self.values = values
            self.grad = np.stack([derivative(values, grid, i, 1) for i in range(grid.dims)])
            self.interp = FieldInterpolator(grid)

    def __call__(self, r):
        if self.zero:
            return np.zeros_like(r)
        if self.callable:
            return self.fn(r)
        return -self.interp(self.grad, r).T


def pinball_force(r, t, sources: DeltaSourceField, U=None, grid: Grid = None,
                  consts: PhysicalConstants = DEFAULT_CONSTANTS, lookup: SourceLookup = None,
                  potential: PotentialForce = None):
    """-grad U(r) + a(t) sum_k grad G_eps(r - r_k) for points r (M, d) or a single point (d,)."""
    r = np.asarray(r, dtype=float)
    single = r.ndim == 1
    r = np.atleast_2d(r)
    potential = potential or PotentialForce(U, grid, consts)
    f = potential(r)
    a = sources.amplitude(t)
    if sources.count and a != 0:
        lookup = lookup or SourceLookup(sources)
        s, _ = lookup.source_sum(r)
        f = f + a * s
    return f[0] if single else f


@dataclass
class EnsembleState:
    positions: np.ndarray       # (M, d), unwrapped
    velocities: np.ndarray
    t: float = 0.0
    seed: int = None

    def __post_init__(self):
        if self.positions.shape[0] < 1:
            raise ValueError("ensemble needs at least one particle")
        if not (np.all(np.isfinite(self.positions)) and np.all(np.isfinite(self.velocities))):
            raise FloatingPointError("non-finite phase-space coordinates")

    @property
    def size(self) -> int:
        return self.positions.shape[0]

    def copy(self):
        return EnsembleState(self.positions.copy(), self.velocities.copy(), self.t, self.seed)


def sample_ensemble(count: int, dims: int, seed: int, center=0.0, width=1.0, velocity_mean=0.0,
                    velocity_std=0.0) -> EnsembleState:
    """Gaussian positions and velocities from a counter-based (Philox) stream."""
    rng = np.random.Generator(np.random.Philox(seed))
    pos = np.asarray(center) + np.asarray(width) * rng.standard_normal((count, dims))
    vel = np.asarray(velocity_mean) + np.asarray(velocity_std) * rng.standard_normal((count, dims))
    return EnsembleState(np.broadcast_to(pos, (count, dims)).copy(),
                         np.broadcast_to(vel, (count, dims)).copy(), 0.0, seed)


@dataclass
class EnsembleSeries:
    times: np.ndarray
    positions: np.ndarray       # (n_t, M, d)
    velocities: np.ndarray
    forces: np.ndarray = None   # source part of the force at each sample, (n_t, M, d)
    meta: dict = field(default_factory=dict)

    def state(self, n) -> EnsembleState:
        return EnsembleState(self.positions[n], self.velocities[n], float(self.times[n]))


def evolve_ensemble(ensemble: EnsembleState, sources: DeltaSourceField, U, omega: float, dt_fast: float,
                    duration: float, grid: Grid = None, consts: PhysicalConstants = DEFAULT_CONSTANTS,
                    record_every: int = 1, min_substeps: int = 16, record_forces: bool = False,
                    check_steps: bool = True) -> EnsembleSeries:
    """Velocity Verlet with the time-dependent force evaluated at the step ends.

    The step must resolve the fast period and the kernel: dt_fast * max|V| <= eps / 4,
    checked at every step when sources are present.
    """
    if sources.count and abs(sources.omega - omega) > 1e-12 * omega:
        raise ValueError("source field was built for a different omega")
    if dt_fast > 2 * np.pi / (omega * min_substeps) * (1 + 1e-12):
        raise StepSizeError("dt_fast does not resolve the fast period")
    mass = np.array(consts.axis_masses(ensemble.positions.shape[1]))
    lookup = SourceLookup(sources) if sources.count else None
    potential = PotentialForce(U, grid, consts)

    def forces(t, r):
        base = potential(r)
        if lookup is None:
            return base, np.zeros_like(r)
        s, _ = lookup.source_sum(r)
        src = sources.amplitude(t) * s
        return base + src, src

    steps = int(round(duration / dt_fast))
    r, v, t0 = ensemble.positions.copy(), ensemble.velocities.copy(), ensemble.t
    f, src = forces(t0, r)
    times, P, V, Fs = [t0], [r.copy()], [v.copy()], [src.copy()]
    for n in range(steps):
        if check_steps and lookup is not None and dt_fast * np.max(np.abs(v)) > sources.kernel_width / 4:
            raise StepSizeError(f"dt_fast * max|V| exceeds eps/4 at t={t0 + n * dt_fast:.6g}")
        v_half = v + 0.5 * dt_fast * f / mass
        r = r + dt_fast * v_half
        t = t0 + (n + 1) * dt_fast
        f, src = forces(t, r)
        v = v_half + 0.5 * dt_fast * f / mass
        if not np.all(np.isfinite(v)):
            raise FloatingPointError(f"non-finite velocities at t={t:.6g}")
        if (n + 1) % record_every == 0:
            times.append(t)
            P.append(r.copy())
            V.append(v.copy())
            Fs.append(src.copy())
    meta = {"omega": omega, "dt_fast": dt_fast, "sources": sources.manifest(), "seed": ensemble.seed,
            "particles": ensemble.size}
    return EnsembleSeries(np.array(times), np.array(P), np.array(V),
                          np.array(Fs) if record_forces else None, meta)


# ---------------------------------------------------------------- moments

@dataclass
class EnsembleMoments:
    grid: Grid
    rho: np.ndarray             # density estimate
    flux: np.ndarray            # (d, ...) rho v
    Pi: np.ndarray              # (d, d, ...) second velocity moment
    bandwidth: float

    @property
    def velocity(self):
        safe = np.where(self.rho > 1e-12 * self.rho.max(), self.rho, np.inf)
        return self.flux / safe

    def spread(self):
        """<w_i w_j> = Pi_ij / rho - v_i v_j."""
        v = self.velocity
        safe = np.where(self.rho > 1e-12 * self.rho.max(), self.rho, np.inf)
        return self.Pi / safe - v[:, None] * v[None, :]

    def isotropy(self, weight=None):
        """Density-weighted averages of the diagonal and off-diagonal spread entries."""
        w = self.rho if weight is None else weight
        s = self.spread()
        d = self.grid.dims
        total = np.sum(w)
        diag = [float(np.sum(w * s[i, i]) / total) for i in range(d)]
        off = [float(np.sum(w * s[i, j]) / total) for i in range(d) for j in range(i + 1, d)]
        return {"diagonal": diag, "off_diagonal": off}


def _cic(grid: Grid, positions, weights):
    """Multilinear (cloud-in-cell) deposit of weights (q, M) onto the grid, per unit cell volume."""
    q = weights.shape[0]
    lo = np.array([grid.axis(i)[0] for i in range(grid.dims)])
    h = np.array(grid.spacing)
    n = np.array(grid.shape)
    s = (positions - lo) / h
    i0 = np.floor(s).astype(int)
    frac = s - i0
    flat_size = int(np.prod(n))
    out = np.zeros((q, flat_size))
    for corner in range(2 ** grid.dims):
        w = np.ones(positions.shape[0])
        flat = np.zeros(positions.shape[0], dtype=int)
        keep = np.ones(positions.shape[0], dtype=bool)
        for i in range(grid.dims):
            upper = (corner >> i) & 1
            idx = i0[:, i] + upper
            w = w * (frac[:, i] if upper else 1.0 - frac[:, i])
            if grid.boundary[i] == "dirichlet":
                keep &= (idx >= 0) & (idx < n[i])
                idx = np.clip(idx, 0, n[i] - 1)
            else:
                idx = idx % n[i]
            flat = flat * n[i] + idx
        for j in range(q):
            out[j] += np.bincount(flat[keep], weights=(weights[j] * w)[keep], minlength=flat_size)
    return out.reshape((q,) + grid.shape) / grid.cell_volume


def _smooth(grid: Grid, values, h):
    """Gaussian smoothing of width h along every grid axis (trailing axes of `values`)."""
    lead = values.ndim - grid.dims
    for i in range(grid.dims):
        ax = lead + i
        if grid.boundary[i] == "dirichlet":
            values = gaussian_filter1d(values, h / grid.spacing[i], axis=ax, mode="constant", truncate=8.0)
        else:
            k = 2 * np.pi * np.fft.fftfreq(grid.shape[i], d=grid.spacing[i])
            shape = [1] * values.ndim
            shape[ax] = -1
            values = np.fft.ifft(np.fft.fft(values, axis=ax) * np.exp(-0.5 * (k * h) ** 2).reshape(shape),
                                 axis=ax).real
    return values


def _deposit(grid: Grid, positions, weights, h):
    """Kernel sum sum_p weights[p] K_h(x - r_p): cloud-in-cell binning, then Gaussian smoothing.

    Accurate when the grid spacing is well below h; periodic axes wrap.
    """
    single = weights.ndim == 1
    wts = weights[None] if single else weights
    out = _smooth(grid, _cic(grid, positions, wts), h)
    return out[0] if single else out


def ensemble_density(ensemble: EnsembleState, grid: Grid, bandwidth: float) -> EnsembleMoments:
    """Gaussian kernel estimates of rho, rho v and Pi_ij = integral V_i V_j P dV."""
    if not bandwidth > 0:
        raise ValueError("bandwidth must be positive")
    r, v = ensemble.positions, ensemble.velocities
    M, d = r.shape
    if d != grid.dims:
        raise ValueError("ensemble and grid dimensions differ")
    rows = [np.ones(M)] + [v[:, i] for i in range(d)] + [v[:, i] * v[:, j] for i in range(d) for j in range(d)]
    dep = _deposit(grid, r, np.array(rows), bandwidth) / M
    rho = dep[0]
    flux = dep[1:1 + d]
    Pi = dep[1 + d:].reshape((d, d) + grid.shape)
    return EnsembleMoments(grid, rho, flux, Pi, bandwidth)


def force_density(positions, forces, grid: Grid, bandwidth: float):
    """Kernel estimate of the force density sum_p F_p K(x - r_p) / M, shape (d, ...)."""
    M, d = positions.shape
    return _deposit(grid, positions, forces.T.copy(), bandwidth) / M


def source_attributed_force_density(positions, sources: DeltaSourceField, t, grid: Grid, bandwidth: float):
    """Source forces binned at the source positions instead of the particle positions.

    Each source is credited with the total force it exerts, -a sum_p grad G(r_p - r_k) / M,
    deposited at r_k. Diagnostic only; it differs from force_density by a dipole term.
    """
    lookup = SourceLookup(sources)
    i, k, disp = lookup.pairs(positions)
    M, d = positions.shape
    per_source = np.zeros((sources.count, d))
    if len(i):
        np.add.at(per_source, k, kernel_gradient(disp, sources.kernel_width))
    per_source *= sources.amplitude(t)
    return _deposit(grid, sources.positions, per_source.T.copy(), bandwidth) / M


# ------------------------------------------------------------- moment check

@dataclass
class MomentReport:
    times: np.ndarray               # interior sample times
    continuity_chi: float           # RMS of residual / bootstrap std over the support
    momentum_chi: float
    continuity_rel: float           # residual norm / norm of d(rho)/dt
    momentum_rel: float
    fitted_coefficient: np.ndarray  # least-squares c(t) in -c grad rho, from the moments
    configured_coefficient: np.ndarray
    coefficient_error: float        # ||c_fit - a n|| / ||a n|| (inf when a n = 0)
    tolerance_chi: float = 3.0
    extras: dict = field(default_factory=dict)

    @property
    def continuity_passed(self) -> bool:
        return self.continuity_chi <= self.tolerance_chi

    @property
    def momentum_passed(self) -> bool:
        return self.momentum_chi <= self.tolerance_chi

    def as_dict(self):
        return {"continuity_chi": self.continuity_chi, "momentum_chi": self.momentum_chi,
                "continuity_rel": self.continuity_rel, "momentum_rel": self.momentum_rel,
                "coefficient_error": self.coefficient_error,
                "fitted_coefficient": list(map(float, self.fitted_coefficient)),
                "configured_coefficient": list(map(float, self.configured_coefficient)),
                "extras": {k: (list(map(float, v)) if np.ndim(v) else float(v)) for k, v in self.extras.items()}}


def _residuals(series: EnsembleSeries, idx, grid, h, U_grad, sources, mass, tau):
    """Continuity and momentum residual fields plus the fitted coefficients, at the interior samples."""
    P, V, times = series.positions, series.velocities, series.times
    d = grid.dims
    mom = [ensemble_density(EnsembleState(P[n][idx], V[n][idx]), grid, h) for n in range(len(times))]
    cont, momres, fits, drhos, grads = [], [], [], [], []
    for n in range(1, len(times) - 1):
        dt2 = times[n + 1] - times[n - 1]
        m0 = mom[n]
        drho = (mom[n + 1].rho - mom[n - 1].rho) / dt2
        div_flux = sum(derivative(m0.flux[i], grid, i, 1) for i in range(d))
        cont.append(drho + div_flux)
        dflux = (mom[n + 1].flux - mom[n - 1].flux) / dt2
        grad_rho = np.stack([derivative(m0.rho, grid, i, 1) for i in range(d)])
        divPi = np.stack([sum(derivative(m0.Pi[i, j], grid, j, 1) for j in range(d)) for i in range(d)])
        safe = np.where(m0.rho > 1e-12 * m0.rho.max(), m0.rho, np.inf)
        rvv = m0.flux[:, None] * m0.flux[None, :] / safe
        div_rvv = np.stack([sum(derivative(rvv[i, j], grid, j, 1) for j in range(d)) for i in range(d)])
        base = mass * dflux + m0.rho[None] * U_grad
        coeff = sources.pressure_coefficient(times[n]) if sources is not None else tau
        momres.append(base + mass * div_rvv + coeff * grad_rho)
        # full Pi already carries the velocity spread, so the fit isolates the source force
        lhs = base + mass * divPi
        fits.append(-float(np.sum(lhs * grad_rho) / np.sum(grad_rho * grad_rho)))
        drhos.append(drho)
        grads.append(grad_rho)
    scales = {"drho": float(np.sqrt(np.mean(np.square(drhos)))), "grad": float(np.sqrt(np.mean(np.square(grads))))}
    return np.array(cont), np.array(momres), np.array(fits), scales


def moment_check(series: EnsembleSeries, grid: Grid, bandwidth: float, U=None, sources: DeltaSourceField = None,
                 consts: PhysicalConstants = DEFAULT_CONSTANTS, tau: float = 0.0, n_boot: int = 32,
                 seed: int = 0, support: float = 0.05, tolerance_chi: float = 3.0) -> MomentReport:
    """Residuals of the ensemble continuity and momentum-moment equations.

    Time derivatives are centred differences between samples. The momentum residual uses
    the configured coefficient a n + tau (or `tau` alone without sources). Bootstrap over
    particles supplies pointwise error bars; chi is the RMS of residual/std over the points
    where rho exceeds `support` times its maximum.
    """
    if len(series.times) < 3:
        raise ValueError("moment check needs at least 3 time samples")
    d = grid.dims
    mass = consts.axis_masses(d)[0]
    Uv = potential_values(U, grid, consts)
    U_grad = np.stack([derivative(Uv, grid, i, 1) for i in range(d)])
    M = series.positions.shape[1]
    full = np.arange(M)
    cont, momres, fits, scales = _residuals(series, full, grid, bandwidth, U_grad, sources, mass, tau)
    rng = np.random.default_rng(seed)
    boot_c, boot_m = [], []
    for _ in range(n_boot):
        idx = rng.integers(0, M, M)
        c, m, _, _ = _residuals(series, idx, grid, bandwidth, U_grad, sources, mass, tau)
        boot_c.append(c)
        boot_m.append(m)
    sd_c = np.std(boot_c, axis=0) + 1e-300
    sd_m = np.std(boot_m, axis=0) + 1e-300
    rho0 = ensemble_density(series.state(len(series.times) // 2), grid, bandwidth).rho
    mask = rho0 > support * rho0.max()
    chi_c = float(np.sqrt(np.mean((cont / sd_c)[:, mask] ** 2)))
    chi_m = float(np.sqrt(np.mean((momres / sd_m)[..., mask] ** 2)))
    inner = series.times[1:-1]
    cont_rel = float(np.sqrt(np.mean(cont ** 2)) / scales["drho"]) if scales["drho"] > 0 else float("inf")
    grad_scale = scales["grad"] * np.sqrt(d)
    configured = (np.array([sources.amplitude(t) * sources.density for t in inner]) if sources is not None
                  else np.zeros(len(inner)))
    coeff_scale = max(np.sqrt(np.mean(configured ** 2)), tau, 1e-300)
    mom_rel = float(np.sqrt(np.mean(momres ** 2)) / (coeff_scale * grad_scale))
    err = (float(np.linalg.norm(fits - configured) / np.linalg.norm(configured))
           if np.any(configured) else float("inf"))
    return MomentReport(inner, chi_c, chi_m, cont_rel, mom_rel, fits, configured, err, tolerance_chi)


def fit_source_coefficient(series: EnsembleSeries, sources: DeltaSourceField, grid: Grid, bandwidth: float,
                           attribution: str = "particle"):
    """Least-squares c(t) in F_src ~ -c grad rho from recorded source forces.

    attribution='particle' deposits each particle's source force where the particle is (the
    momentum actually delivered to the ensemble at that place); 'source' credits it to the
    source that exerted it.
    """
    if series.forces is None and attribution == "particle":
        raise ValueError("series was recorded without forces")
    out = []
    for n, t in enumerate(series.times):
        m = ensemble_density(series.state(n), grid, bandwidth)
        grad = np.stack([derivative(m.rho, grid, i, 1) for i in range(grid.dims)])
        if attribution == "particle":
            f = force_density(series.positions[n], series.forces[n], grid, bandwidth)
        else:
            f = source_attributed_force_density(series.positions[n], sources, t, grid, bandwidth)
        out.append(-float(np.sum(f * grad) / np.sum(grad * grad)))
    return np.array(out)


def kernel_property_error(density_fn, grad_fn, point, eps: float, dims: int = 1, half_width: float = None,
                          points: int = 4001):
    """|integral P(r) grad G_eps(r - r_k) dr + grad P(r_k)| by tensor-product quadrature near r_k."""
    point = np.atleast_1d(np.asarray(point, dtype=float))
    half = KERNEL_REACH * 1.5 * eps if half_width is None else half_width
    axes = [np.linspace(p - half, p + half, points) for p in point]
    mesh = np.meshgrid(*axes, indexing="ij")
    r = np.stack(mesh, axis=-1)
    integrand = density_fn(r)[..., None] * kernel_gradient(r - point, eps)
    val = integrand
    for i in range(dims):
        val = np.trapezoid(val, axes[i], axis=0)
    return float(np.linalg.norm(val + np.asarray(grad_fn(point))))


def write_ensemble_snapshot(path, state: EnsembleState, meta: dict = None):
    """CSV rows of position then velocity components, with a JSON sidecar manifest."""
    path = Path(path)
    d = state.positions.shape[1]
    header = ",".join([f"x{i}" for i in range(d)] + [f"v{i}" for i in range(d)])
    np.savetxt(path, np.hstack([state.positions, state.velocities]), delimiter=",", header=header,
               comments="", fmt="%.17g")
    side = path.with_suffix(path.suffix + ".json")
    side.write_text(json.dumps({"t": state.t, "seed": state.seed, **(meta or {})}, indent=1))
    return path


def read_ensemble_snapshot(path) -> EnsembleState:
    path = Path(path)
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    d = data.shape[1] // 2
    side = path.with_suffix(path.suffix + ".json")
    meta = json.loads(side.read_text()) if side.exists() else {}
    return EnsembleState(data[:, :d].copy(), data[:, d:].copy(), float(meta.get("t", 0.0)), meta.get("seed"))
