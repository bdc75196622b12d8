"""Oscillating-pressure quantum hydrodynamics: solvers, references and experiment harness."""

from .grid import Grid, PhysicalConstants, ScalarField, VectorField, Wavefunction
from .schrodinger import EMPotentialSpec, PotentialSpec, evolve_schrodinger
from .hydro import OscillationConfig, run

__version__ = "0.1.0"
__all__ = ["Grid", "PhysicalConstants", "ScalarField", "VectorField", "Wavefunction", "EMPotentialSpec",
           "PotentialSpec", "evolve_schrodinger", "OscillationConfig", "run", "__version__"]
