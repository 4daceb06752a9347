"""Spectral solver for resonant elliptic inclusions with nonsmooth
potentials.

The library discretizes the problem in a Dirichlet eigenbasis, eliminates
the high modes by strongly convex minimization, searches the reduced
low-mode landscape for critical points, and certifies two distinct
nontrivial solutions pointwise against the subgradient interval.
"""

from .config import ConfigError, SolverConfig, parse_config, with_overrides
from .energy import (EnergyContext, ResidualReport, energy,
                     min_norm_subgradient, residual_certificate,
                     subgradient_selection)
from .multiplicity import (CertificationError, CriticalPoint,
                           DistinctnessError, HypothesisFailure,
                           LinkingReport, OuterOptions, PipelineError,
                           SearchError, SolutionSet, build_context,
                           local_linking_check, minimize_psi,
                           second_point_search, solve_hvi)
from .potential import (HypothesisCheck, HypothesisReport, PiecewisePotential,
                        PotentialError,
                        SubgradientInterval, chain_slope_bound,
                        check_hypotheses, clarke_interval, example_potential,
                        max_potential, trivial_potential, value)
from .reduction import (InnerOptions, InnerSolveError, ReducedEval,
                        ReductionResult, continuity_probe, reduce,
                        reduced_eval, strong_convexity_audit)
from .spectral import (DomainSpec, EigenBasis, Quadrature, SpaceDecomposition,
                       SpectralVector, build_basis, build_quadrature,
                       coercivity_constant, decompose, evaluate, unit_vector,
                       zero_vector)

__version__ = "0.1.0"

__all__ = [
    "CertificationError", "ConfigError", "CriticalPoint", "DistinctnessError",
    "DomainSpec", "EigenBasis", "EnergyContext", "HypothesisFailure",
    "HypothesisCheck", "HypothesisReport", "InnerOptions", "InnerSolveError", "LinkingReport",
    "OuterOptions", "PiecewisePotential", "PipelineError", "PotentialError",
    "Quadrature",
    "ReducedEval", "ReductionResult", "ResidualReport", "SearchError",
    "SolutionSet", "SolverConfig", "SpaceDecomposition", "SpectralVector",
    "SubgradientInterval", "build_basis", "build_context", "build_quadrature",
    "chain_slope_bound", "check_hypotheses", "clarke_interval",
    "coercivity_constant", "continuity_probe", "decompose", "energy",
    "evaluate", "example_potential", "local_linking_check", "max_potential",
    "min_norm_subgradient", "minimize_psi", "parse_config", "reduce",
    "reduced_eval", "residual_certificate", "second_point_search",
    "solve_hvi", "strong_convexity_audit", "subgradient_selection",
    "trivial_potential", "unit_vector", "value", "with_overrides",
    "zero_vector",
]
