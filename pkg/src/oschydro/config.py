"""Scenario configuration: flat sectioned key = value files with typed scalars.

Grammar
-------
Sections in square brackets, one ``key = value`` per line, ``#`` starts a comment.
Values are typed on read: ``true``/``false`` become bools, integer and float literals
become numbers, comma separated values become lists of those, anything else stays a
string. Values in ``[scenario]`` are kept verbatim. Recognised sections:

``[scenario]``     name, experiment, system (scalar | em | many_body | pinball), description
``[grid]``         extents, points, boundary (periodic | dirichlet; one entry or one per axis)
``[physics]``      hbar, mass, charge, light_speed
``[potential]``    kind plus the keyword parameters of that potential
``[initial]``      state plus its keyword parameters, or ``file`` naming a snapshot
``[oscillation]``  omega or omegas, substeps_per_period, seed_fast, filter_strength
``[run]``          duration and experiment-specific run settings
``[seeds]``        named integer seeds
``[tolerances]``   named acceptance thresholds
``[params]``       free-form experiment parameters
"""

from __future__ import annotations

import configparser
import hashlib
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import Grid, PhysicalConstants, ScalarField, Wavefunction, read_snapshot
from .schrodinger import PotentialSpec
from . import states

SECTIONS = ("scenario", "grid", "physics", "potential", "initial", "oscillation", "run", "seeds",
            "tolerances", "params")
SYSTEMS = ("scalar", "em", "many_body", "pinball")
_INT = re.compile(r"^[+-]?\d+$")
_FLOAT = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


class ConfigError(ValueError):
    """Configuration problem, located by file, section, key and line where known."""

    def __init__(self, message, path=None, section=None, key=None, line=None):
        self.path, self.section, self.key, self.line = path, section, key, line
        where = []
        if path is not None:
            where.append(str(path) + (f":{line}" if line else ""))
        if section is not None:
            where.append(f"[{section}]" + (f" {key}" if key else ""))
        super().__init__((" ".join(where) + ": " if where else "") + message)


def parse_scalar(text: str):
    t = text.strip()
    low = t.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    if low in ("none", ""):
        return None
    if _INT.match(t):
        return int(t)
    if _FLOAT.match(t) or low in ("inf", "-inf"):
        return float(t)
    return t


def parse_value(text: str):
    if "," in text:
        return [parse_scalar(p) for p in text.split(",") if p.strip()]
    return parse_scalar(text)


def blob_hash(data: bytes) -> str:
    """Git-style content hash: sha1 over 'blob <size>\\0' + data."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def _as_list(v):
    return list(v) if isinstance(v, (list, tuple)) else [v]


# validation rules keyed by option name: (predicate, message)
def _positive(v):
    return all(isinstance(x, (int, float)) and not isinstance(x, bool) and x > 0 for x in _as_list(v))


def _nonneg(v):
    return all(isinstance(x, (int, float)) and not isinstance(x, bool) and x >= 0 for x in _as_list(v))


_RULES = {
    "omega": (_positive, "must be positive"),
    "omegas": (_positive, "must all be positive"),
    "omega0": (_positive, "must be positive"),
    "extents": (_positive, "must be positive"),
    "points": (lambda v: all(isinstance(x, int) and x >= 8 for x in _as_list(v)), "must be integers >= 8"),
    "hbar": (_positive, "must be positive"),
    "mass": (_positive, "must be positive"),
    "light_speed": (_positive, "must be positive"),
    "duration": (_positive, "must be positive"),
    "substeps_per_period": (lambda v: isinstance(v, int) and v >= 16, "must be an integer >= 16"),
    "width": (_positive, "must be positive"),
    "kernel_width": (_positive, "must be positive"),
    "kernel_widths": (_positive, "must all be positive"),
    "bandwidth": (_positive, "must be positive"),
    "source_density": (_nonneg, "must be non-negative"),
    "tau": (_nonneg, "must be non-negative"),
    "background": (_nonneg, "must be non-negative"),
    "particles": (lambda v: isinstance(v, int) and v >= 1, "must be a positive integer"),
    "reference_dt": (_positive, "must be positive"),
    "dts": (_positive, "must all be positive"),
    "workers": (lambda v: isinstance(v, int) and v >= 1, "must be a positive integer"),
}


@dataclass
class Scenario:
    """Parsed, validated scenario configuration."""
    path: Path
    sections: dict
    text: str
    lines: dict = field(default_factory=dict)   # (section, key) -> line number

    # ------------------------------------------------------------ loading
    @classmethod
    def load(cls, path) -> "Scenario":
        path = Path(path)
        if not path.is_file():
            raise ConfigError("config file not found", path)
        text = path.read_text()
        return cls.from_text(text, path)

    @classmethod
    def from_text(cls, text: str, path=Path("<string>")) -> "Scenario":
        cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        cp.optionxform = str
        try:
            cp.read_string(text, source=str(path))
        except configparser.DuplicateOptionError as e:
            raise ConfigError(f"duplicate key '{e.option}'", path, e.section, e.option, e.lineno) from e
        except configparser.DuplicateSectionError as e:
            raise ConfigError(f"duplicate section '{e.section}'", path, e.section, line=e.lineno) from e
        except configparser.MissingSectionHeaderError as e:
            raise ConfigError("content before the first [section] header", path, line=e.lineno) from e
        except configparser.ParsingError as e:
            line = e.errors[0][0] if e.errors else None
            raise ConfigError("malformed line (expected key = value)", path, line=line) from e
        lines = _locate_keys(text)
        sections = {}
        for name in cp.sections():
            if name not in SECTIONS:
                raise ConfigError(f"unknown section (allowed: {', '.join(SECTIONS)})", path, name,
                                  line=lines.get((name, None)))
            raw = name == "scenario"    # names and descriptions stay verbatim
            sections[name] = {k: (v.strip() if raw else parse_value(v)) for k, v in cp.items(name)}
        sc = cls(Path(path), sections, text, lines)
        sc.validate()
        return sc

    def error(self, message, section, key=None):
        return ConfigError(message, self.path, section, key, self.lines.get((section, key)))

    # ------------------------------------------------------------ validation
    def validate(self):
        from .experiments import EXPERIMENTS
        if "scenario" not in self.sections:
            raise self.error("missing section", "scenario")
        for key in ("name", "experiment"):
            if key not in self.sections["scenario"]:
                raise self.error("required key missing", "scenario", key)
        exp = self.experiment
        if exp not in EXPERIMENTS:
            raise self.error(f"unknown experiment '{exp}' (known: {', '.join(sorted(EXPERIMENTS))})",
                             "scenario", "experiment")
        system = self.system
        if system not in SYSTEMS:
            raise self.error(f"unknown system '{system}' (allowed: {', '.join(SYSTEMS)})", "scenario", "system")
        for sec, opts in self.sections.items():
            for key, value in opts.items():
                rule = _RULES.get(key)
                if rule is not None and not rule[0](value):
                    raise self.error(f"{rule[1]} (got {value!r})", sec, key)
        for sec in ("seeds",):
            for key, value in self.sections.get(sec, {}).items():
                if not isinstance(value, int) or value < 0:
                    raise self.error("seeds must be non-negative integers", sec, key)
        for key, value in self.sections.get("tolerances", {}).items():
            if not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in _as_list(value)):
                raise self.error("tolerances must be numbers", "tolerances", key)
        if "grid" in self.sections:
            g = self.sections["grid"]
            if "extents" not in g or "points" not in g:
                raise self.error("grid needs extents and points", "grid")
            if len(_as_list(g["extents"])) != len(_as_list(g["points"])):
                raise self.error("extents and points differ in length", "grid", "points")
            for b in _as_list(g.get("boundary", "periodic")):
                if str(b).lower() not in ("periodic", "dirichlet"):
                    raise self.error(f"unknown boundary '{b}'", "grid", "boundary")
        init = self.sections.get("initial", {})
        if "file" in init:
            f = self.resolve(init["file"])
            if not f.is_file():
                raise self.error(f"referenced file does not exist: {f}", "initial", "file")
        if "state" in init and not callable(getattr(states, str(init["state"]), None)):
            raise self.error(f"unknown initial state '{init['state']}'", "initial", "state")
        pot = self.sections.get("potential", {})
        if pot:
            try:
                self.potential()
            except (ValueError, TypeError) as e:
                raise self.error(str(e), "potential", "kind") from e

    # ------------------------------------------------------------ accessors
    @property
    def name(self) -> str:
        return str(self.sections["scenario"]["name"])

    @property
    def experiment(self) -> str:
        return str(self.sections["scenario"]["experiment"])

    @property
    def system(self) -> str:
        return str(self.sections["scenario"].get("system", "scalar"))

    @property
    def config_hash(self) -> str:
        return blob_hash(self.text.encode())

    def get(self, section, key, default=None):
        return self.sections.get(section, {}).get(key, default)

    def tol(self, key, default=None):
        return self.get("tolerances", key, default)

    def seed(self, key, default=0):
        return int(self.get("seeds", key, default))

    def floats(self, section, key, default=None):
        v = self.get(section, key, default)
        return None if v is None else [float(x) for x in _as_list(v)]

    def resolve(self, p) -> Path:
        p = Path(str(p))
        return p if p.is_absolute() else (self.path.parent / p)

    def override_seeds(self, base: int):
        """Replace every seed with base + its position in sorted key order."""
        seeds = self.sections.setdefault("seeds", {})
        for i, key in enumerate(sorted(seeds)):
            seeds[key] = int(base) + i

    def grid(self) -> Grid:
        g = self.sections.get("grid")
        if g is None:
            raise self.error("scenario needs a [grid] section", "grid")
        extents = [float(x) for x in _as_list(g["extents"])]
        points = [int(x) for x in _as_list(g["points"])]
        bounds = [str(b).lower() for b in _as_list(g.get("boundary", "periodic"))]
        if len(bounds) == 1:
            bounds = bounds * len(extents)
        return Grid(tuple(extents), tuple(points), tuple(bounds))

    def consts(self) -> PhysicalConstants:
        p = self.sections.get("physics", {})
        mass = p.get("mass", 1.0)
        mass = tuple(float(m) for m in mass) if isinstance(mass, list) else float(mass)
        return PhysicalConstants(hbar=float(p.get("hbar", 1.0)), mass=mass,
                                 charge=float(p.get("charge", 1.0)),
                                 light_speed=float(p.get("light_speed", 1.0)))

    def potential(self):
        p = dict(self.sections.get("potential", {}))
        kind = p.pop("kind", "free")
        if kind in (None, "none"):
            return None
        return PotentialSpec(str(kind), p)

    def initial(self, grid: Grid = None, consts: PhysicalConstants = None):
        """Initial Wavefunction, or (rho, S) when loaded from a density snapshot."""
        grid = grid or self.grid()
        consts = consts or self.consts()
        p = dict(self.sections.get("initial", {}))
        if "file" in p:
            field_, _ = read_snapshot(self.resolve(p["file"]))
            if isinstance(field_, Wavefunction):
                return field_
            if field_.grid != grid:
                raise self.error("snapshot grid differs from [grid]", "initial", "file")
            return field_, ScalarField(grid, np.zeros(grid.shape))
        name = p.pop("state", "gaussian_packet")
        fn = getattr(states, name)
        if name in ("harmonic_ground_state", "periodic_harmonic_ground_state", "coherent_state", "plane_wave"):
            p.setdefault("consts", consts)
        for key in ("center", "momentum", "widths", "centers"):
            if key in p and not isinstance(p[key], list):
                p[key] = [p[key]]
        out = fn(grid, **p)
        if isinstance(out, np.ndarray):
            return Wavefunction(grid, np.sqrt(out).astype(complex))
        return out

    def omegas(self):
        o = self.sections.get("oscillation", {})
        if "omegas" in o:
            return [float(x) for x in _as_list(o["omegas"])]
        if "omega" in o:
            return [float(o["omega"])]
        raise self.error("needs omega or omegas", "oscillation")

    def oscillation(self, omega: float = None, **overrides):
        from .hydro import OscillationConfig
        o = self.sections.get("oscillation", {})
        kw = {"substeps_per_period": int(o.get("substeps_per_period", 32)),
              "seed_fast": bool(o.get("seed_fast", True)),
              "oscillating_term": bool(o.get("oscillating_term", True)),
              "filter_strength": o.get("filter_strength", 1.0)}
        kw.update(overrides)
        return OscillationConfig(float(omega if omega is not None else self.omegas()[0]), **kw)

    def echo(self) -> dict:
        return {"path": self.path.name, "sections": self.sections}


def _locate_keys(text: str) -> dict:
    """Map (section, key) and (section, None) to 1-based line numbers."""
    out, section = {}, None
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        m = re.match(r"^\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            out.setdefault((section, None), i)
            continue
        if "=" in line and section is not None:
            out.setdefault((section, line.split("=", 1)[0].strip()), i)
    return out


def bundled_scenarios() -> dict:
    """Name -> path of the scenario files shipped with the package."""
    root = Path(__file__).parent / "scenarios"
    return {p.stem: p for p in sorted(root.glob("*.cfg"))}
