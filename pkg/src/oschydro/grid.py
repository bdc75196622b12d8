"""Uniform Cartesian grids, lattice fields and the derivative/quadrature operators.

Periodic axes use spectral derivatives. Dirichlet axes use 4th-order central
differences with one-sided 4th-order closures at the two outermost samples.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

PERIODIC = "periodic"
DIRICHLET = "dirichlet"


class GridMismatchError(ValueError):
    """Raised when fields living on different grids are combined."""


class NonFiniteFieldError(FloatingPointError):
    """Raised when an operation produces NaN or Inf samples."""


@dataclass(frozen=True)
class Grid:
    extents: tuple
    points: tuple
    boundary: tuple = None

    def __post_init__(self):
        extents = tuple(float(e) for e in np.atleast_1d(self.extents))
        points = tuple(int(n) for n in np.atleast_1d(self.points))
        boundary = self.boundary
        if boundary is None:
            boundary = (PERIODIC,) * len(points)
        elif isinstance(boundary, str):
            boundary = (boundary,) * len(points)
        boundary = tuple(_normalize_tag(b) for b in boundary)
        if not 1 <= len(points) <= 3:
            raise ValueError("grid must have 1 to 3 axes")
        if not len(extents) == len(points) == len(boundary):
            raise ValueError("extents, points and boundary must have one entry per axis")
        if min(points) < 8:
            raise ValueError("each axis needs at least 8 points")
        if min(extents) <= 0:
            raise ValueError("extents must be positive")
        object.__setattr__(self, "extents", extents)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "boundary", boundary)

    @property
    def dims(self) -> int:
        return len(self.points)

    @property
    def shape(self) -> tuple:
        return self.points

    @property
    def spacing(self) -> tuple:
        return tuple(L / n if b == PERIODIC else L / (n - 1)
                     for L, n, b in zip(self.extents, self.points, self.boundary))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def all_periodic(self) -> bool:
        return all(b == PERIODIC for b in self.boundary)

    def axis(self, i: int) -> np.ndarray:
        """Sample coordinates along axis i; the domain is centred on zero."""
        L, n = self.extents[i], self.points[i]
        if self.boundary[i] == PERIODIC:
            return -0.5 * L + np.arange(n) * (L / n)
        return np.linspace(-0.5 * L, 0.5 * L, n)

    def mesh(self) -> tuple:
        return tuple(np.meshgrid(*[self.axis(i) for i in range(self.dims)], indexing="ij"))

    def wavenumbers(self, i: int) -> np.ndarray:
        return 2 * np.pi * np.fft.fftfreq(self.points[i], d=self.spacing[i])

    def wavenumber_mesh(self) -> tuple:
        return tuple(np.meshgrid(*[self.wavenumbers(i) for i in range(self.dims)], indexing="ij"))

    def radius_squared(self, center=None) -> np.ndarray:
        center = np.zeros(self.dims) if center is None else np.atleast_1d(center)
        return sum((X - c) ** 2 for X, c in zip(self.mesh(), center))

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def header(self) -> dict:
        return {"dims": self.dims, "points": list(self.points),
                "extents": list(self.extents), "boundary": list(self.boundary)}

    @classmethod
    def from_header(cls, h: dict) -> "Grid":
        return cls(tuple(h["extents"]), tuple(h["points"]), tuple(h["boundary"]))


def _normalize_tag(tag: str) -> str:
    t = str(tag).strip().lower().replace("_", "-")
    if t in ("periodic", "p"):
        return PERIODIC
    if t in ("dirichlet", "dirichlet-zero", "d"):
        return DIRICHLET
    raise ValueError(f"unknown boundary tag {tag!r}")


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float = 1.0
    mass: tuple = (1.0,)
    charge: float = 1.0
    light_speed: float = 1.0

    def __post_init__(self):
        masses = tuple(float(m) for m in np.atleast_1d(self.mass))
        object.__setattr__(self, "mass", masses)
        if self.hbar <= 0:
            raise ValueError("hbar must be positive")
        if min(masses) <= 0:
            raise ValueError("masses must be positive")
        if self.light_speed <= 0:
            raise ValueError("light speed must be positive")

    @property
    def m(self) -> float:
        return self.mass[0]

    def axis_masses(self, dims: int) -> tuple:
        """Mass attached to each axis: one shared mass, or one per axis in configuration space."""
        if len(self.mass) == 1:
            return self.mass * dims
        if len(self.mass) != dims:
            raise ValueError(f"{len(self.mass)} masses given for {dims} axes")
        return self.mass


@dataclass(frozen=True)
class ScalarField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        object.__setattr__(self, "values", v)

    def check_finite(self, what="field"):
        if not np.all(np.isfinite(self.values)):
            bad = np.argwhere(~np.isfinite(self.values))[0]
            raise NonFiniteFieldError(f"{what} has non-finite value at index {tuple(bad)}")
        return self

    def __add__(self, other):
        return ScalarField(self.grid, self.values + _values_on(self.grid, other))

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - _values_on(self.grid, other))

    def __mul__(self, other):
        return ScalarField(self.grid, self.values * _values_on(self.grid, other))

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(self.grid, -self.values)


@dataclass(frozen=True)
class VectorField:
    grid: Grid
    components: tuple = field(default=())

    def __post_init__(self):
        comps = tuple(np.asarray(c, dtype=float) for c in self.components)
        if len(comps) != self.grid.dims:
            raise ValueError("component count must equal grid dims")
        for c in comps:
            if c.shape != self.grid.shape:
                raise ValueError("component shape does not match grid")
        object.__setattr__(self, "components", comps)

    def norm_squared(self) -> np.ndarray:
        return sum(c ** 2 for c in self.components)

    @classmethod
    def uniform(cls, grid: Grid, vector) -> "VectorField":
        vec = np.atleast_1d(np.asarray(vector, dtype=float))
        return cls(grid, tuple(np.full(grid.shape, v) for v in vec))

    @classmethod
    def zeros(cls, grid: Grid) -> "VectorField":
        return cls(grid, tuple(grid.zeros() for _ in range(grid.dims)))


@dataclass(frozen=True)
class Wavefunction:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != self.grid.shape:
            raise ValueError("wavefunction shape does not match grid")
        object.__setattr__(self, "values", v)

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    def norm(self) -> float:
        return integrate_values(self.grid, self.density)

    def normalized(self) -> "Wavefunction":
        return Wavefunction(self.grid, self.values / np.sqrt(self.norm()))


def _values_on(grid, other):
    if isinstance(other, (ScalarField, Wavefunction)):
        if other.grid != grid:
            raise GridMismatchError("fields live on different grids")
        return other.values
    return other


def require_same_grid(*fields):
    grids = {f.grid for f in fields}
    if len(grids) > 1:
        raise GridMismatchError("fields live on different grids")
    return fields[0].grid


# ---------------------------------------------------------------- derivatives

def _spectral(values, grid, axis, order):
    k = grid.wavenumbers(axis)
    n = grid.points[axis]
    factor = (1j * k) ** order
    if order % 2 == 1 and n % 2 == 0:
        factor[n // 2] = 0.0
    shape = [1] * grid.dims
    shape[axis] = n
    factor = factor.reshape(shape)
    out = np.fft.ifft(factor * np.fft.fft(values, axis=axis), axis=axis)
    return out if np.iscomplexobj(values) else out.real


def _take(a, idx, axis):
    return np.take(a, idx, axis=axis)


def _fd4(values, grid, axis, order, wrap):
    h = grid.spacing[axis]
    f = np.asarray(values)
    if wrap:
        r = lambda s: np.roll(f, -s, axis=axis)
        if order == 1:
            return (r(-2) - 8 * r(-1) + 8 * r(1) - r(2)) / (12 * h)
        return (-r(-2) + 16 * r(-1) - 30 * f + 16 * r(1) - r(2)) / (12 * h * h)
    n = f.shape[axis]
    out = np.empty_like(f)
    sl = lambda a, b: _take(f, np.arange(a, n + b) if b <= 0 else np.arange(a, b), axis)
    interior = [slice(None)] * f.ndim
    interior[axis] = slice(2, n - 2)
    if order == 1:
        out[tuple(interior)] = (sl(0, -4) - 8 * sl(1, -3) + 8 * sl(3, -1) - sl(4, 0)) / (12 * h)
        closure = [np.array([-25, 48, -36, 16, -3]) / (12 * h),
                   np.array([-3, -10, 18, -6, 1]) / (12 * h)]
        sign = -1.0
    else:
        out[tuple(interior)] = (-sl(0, -4) + 16 * sl(1, -3) - 30 * sl(2, -2)
                                + 16 * sl(3, -1) - sl(4, 0)) / (12 * h * h)
        closure = [np.array([45, -154, 214, -156, 61, -10]) / (12 * h * h),
                   np.array([10, -15, -4, 14, -6, 1]) / (12 * h * h)]
        sign = 1.0
    for i, w in enumerate(closure):
        lead = np.tensordot(w, _take(f, np.arange(len(w)), axis), axes=([0], [axis]))
        tail = np.tensordot(w, _take(f, n - 1 - np.arange(len(w)), axis), axes=([0], [axis]))
        idx = [slice(None)] * f.ndim
        idx[axis] = i
        out[tuple(idx)] = lead
        idx[axis] = n - 1 - i
        out[tuple(idx)] = sign * tail
    return out


def derivative(values, grid: Grid, axis: int, order: int = 1, method: str = "auto"):
    """Derivative of a sampled array along one axis.

    method='auto' picks spectral on periodic axes and 4th-order differences on
    dirichlet axes. method='fd4' forces local differences (wrap-around on periodic
    axes). method='fd4-open' uses the one-sided closures at the array ends on every
    axis, for fields that are not continuous across the periodic seam.
    """
    if order not in (1, 2):
        raise ValueError("only first and second derivatives are supported")
    periodic = grid.boundary[axis] == PERIODIC
    if method == "auto":
        method = "spectral" if periodic else "fd4"
    if method == "spectral":
        if not periodic:
            raise ValueError("spectral derivative needs a periodic axis")
        return _spectral(values, grid, axis, order)
    if method == "fd4":
        return _fd4(values, grid, axis, order, wrap=periodic)
    if method == "fd4-open":
        return _fd4(values, grid, axis, order, wrap=False)
    raise ValueError(f"unknown derivative method {method!r}")


def gradient_values(values, grid, method="auto"):
    return tuple(derivative(values, grid, i, 1, method) for i in range(grid.dims))


def laplacian_values(values, grid, method="auto"):
    return sum(derivative(values, grid, i, 2, method) for i in range(grid.dims))


def divergence_values(components, grid, method="auto"):
    return sum(derivative(c, grid, i, 1, method) for i, c in enumerate(components))


def integrate_values(grid, values) -> float:
    out = np.asarray(values)
    for i in reversed(range(grid.dims)):
        h = grid.spacing[i]
        if grid.boundary[i] == PERIODIC:
            out = out.sum(axis=i) * h
        else:
            out = np.trapezoid(out, dx=h, axis=i)
    return out.item() if np.ndim(out) == 0 else out


def gradient(f: ScalarField, method="auto") -> VectorField:
    f.check_finite("gradient input")
    g = VectorField(f.grid, gradient_values(f.values, f.grid, method))
    for c in g.components:
        ScalarField(f.grid, c).check_finite("gradient output")
    return g


def laplacian(f: ScalarField, method="auto") -> ScalarField:
    f.check_finite("laplacian input")
    return ScalarField(f.grid, laplacian_values(f.values, f.grid, method)).check_finite("laplacian output")


def divergence(v: VectorField, method="auto") -> ScalarField:
    return ScalarField(v.grid, divergence_values(v.components, v.grid, method)).check_finite("divergence output")


def integrate(f) -> float:
    if isinstance(f, ScalarField):
        f.check_finite("integrand")
    return integrate_values(f.grid, f.values)


def curl_2d(v: VectorField, method="auto") -> ScalarField:
    if v.grid.dims != 2:
        raise ValueError("curl diagnostic is defined for 2D grids")
    vx, vy = v.components
    return ScalarField(v.grid, derivative(vy, v.grid, 0, 1, method) - derivative(vx, v.grid, 1, 1, method))


# ------------------------------------------------------------------ snapshots

def write_snapshot(path, field, time: float = 0.0, mode: str = "csv"):
    """Write a field as CSV text or as raw little-endian float64 after a one-line JSON header.

    Complex fields are stored as interleaved (real, imag) pairs.
    """
    path = Path(path)
    grid = field.grid
    values = np.asarray(field.values)
    is_complex = np.iscomplexobj(values)
    header = dict(grid.header(), time=float(time), complex=bool(is_complex))
    flat = values.reshape(-1)
    if is_complex:
        flat = np.column_stack([flat.real, flat.imag])
    if mode == "csv":
        with open(path, "w") as fh:
            for key in ("dims", "points", "extents", "boundary", "time", "complex"):
                val = header[key]
                val = " ".join(map(str, val)) if isinstance(val, list) else val
                fh.write(f"# {key}={val}\n")
            np.savetxt(fh, flat, fmt="%.17g", delimiter=",")
    elif mode == "binary":
        with open(path, "wb") as fh:
            fh.write((json.dumps(header) + "\n").encode())
            fh.write(np.ascontiguousarray(flat, dtype="<f8").tobytes())
    else:
        raise ValueError("snapshot mode must be 'csv' or 'binary'")
    return path


def read_snapshot(path, mode: str = "csv"):
    """Inverse of write_snapshot; returns (field, time)."""
    path = Path(path)
    if mode == "csv":
        header, rows = {}, []
        with open(path) as fh:
            for line in fh:
                if line.startswith("#"):
                    key, _, val = line[1:].strip().partition("=")
                    header[key] = val
                elif line.strip():
                    rows.append(line)
        h = {"dims": int(header["dims"]),
             "points": [int(x) for x in header["points"].split()],
             "extents": [float(x) for x in header["extents"].split()],
             "boundary": header["boundary"].split(),
             "time": float(header["time"]),
             "complex": header["complex"] == "True"}
        data = np.loadtxt(rows, delimiter=",", ndmin=2 if h["complex"] else 1)
    elif mode == "binary":
        with open(path, "rb") as fh:
            h = json.loads(fh.readline().decode())
            data = np.frombuffer(fh.read(), dtype="<f8")
    else:
        raise ValueError("snapshot mode must be 'csv' or 'binary'")
    grid = Grid.from_header(h)
    if h["complex"]:
        data = data.reshape(-1, 2)
        values = (data[:, 0] + 1j * data[:, 1]).reshape(grid.shape)
        return Wavefunction(grid, values), h["time"]
    return ScalarField(grid, np.asarray(data, dtype=float).reshape(grid.shape)), h["time"]
