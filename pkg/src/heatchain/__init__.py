"""Gaussian open-system simulator for heat transport in harmonic chains."""

from .gaussian_core import (GaussianState, PhaseSpaceLayout, hadamard, matrix_exp, sine_transform,
                            symplectic_form, toeplitz_mode_frequencies)
from .model import (ChainSpec, GeneratorSet, HamiltonianSpec, ReservoirBank, assemble_generators,
                    build_adjacency, build_generators, nbar_from_temperature)
from .steady import (NoSteadyStateError, SolverError, SteadyState, checkerboard_validate,
                     closed_form_vstar, solve_steady, stability_check)
from .propagator import Trajectory, evolve_all_diffusive, evolve_cm_closed, evolve_ode
from .thermo import CurrentReport, mean_energy, occupations, total_current

__version__ = "0.1.0"

__all__ = [
    "ChainSpec", "CurrentReport", "GaussianState", "GeneratorSet", "HamiltonianSpec",
    "NoSteadyStateError", "PhaseSpaceLayout", "ReservoirBank", "SolverError", "SteadyState",
    "Trajectory", "assemble_generators", "build_adjacency", "build_generators",
    "checkerboard_validate", "closed_form_vstar", "evolve_all_diffusive", "evolve_cm_closed",
    "evolve_ode", "hadamard", "matrix_exp", "mean_energy", "nbar_from_temperature", "occupations",
    "sine_transform", "solve_steady", "stability_check", "symplectic_form",
    "toeplitz_mode_frequencies", "total_current",
]
