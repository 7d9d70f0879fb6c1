"""Fractional Schroedinger semigroups on periodic grids.

Spectral fractional Laplacians, stable subordinators, kernel profiles,
potential diagnostics, three evolution engines and decay analysis.
"""
__version__ = "0.1.0"

from .decay import DecayReport, a_star, assemble_report, decay_certificate, estimate_omega, omega_chain, omega_equals_astar
from .engine import EvolutionConfig, EvolutionResult, evolve, evolve_many
from .errors import FracSemiError
from .grid import Field, FractionalOrder, TorusGrid
from .kernels import KernelProfile, build_profile
from .potentials import Potential, TruncatedPotential, make_counterexample, truncate
from .subordinator import SubordinatorDensity, build_density, subordinate

__all__ = [
    "DecayReport",
    "EvolutionConfig",
    "EvolutionResult",
    "Field",
    "FracSemiError",
    "FractionalOrder",
    "KernelProfile",
    "Potential",
    "SubordinatorDensity",
    "TorusGrid",
    "TruncatedPotential",
    "a_star",
    "assemble_report",
    "build_density",
    "build_profile",
    "decay_certificate",
    "estimate_omega",
    "evolve",
    "evolve_many",
    "make_counterexample",
    "omega_chain",
    "omega_equals_astar",
    "subordinate",
    "truncate",
]
