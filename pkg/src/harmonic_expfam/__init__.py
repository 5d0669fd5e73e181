"""Harmonic exponential family densities on S1, S2 and SO(3)."""

__version__ = "0.1.0"

from .special_functions import BasisIndex, Manifold, ManifoldPoint, eval_basis, num_coeffs
from .transforms import GridFunction, GridSpec, SpectralCoeffs, analyze, make_grid, synthesize
from .expfam import (
    MomentReport,
    NaturalParams,
    SufficientStats,
    density_grid,
    empirical_moments,
    log_likelihood,
    log_partition,
    moments,
    nll_gradient,
)
from .optimize import CVReport, FitConfig, FitResult, cross_validate, fit_map
from .bayes_rotation import map_rotation, posterior, posterior_grid, rotate_spectral

__all__ = [
    "BasisIndex",
    "CVReport",
    "FitConfig",
    "FitResult",
    "GridFunction",
    "GridSpec",
    "Manifold",
    "ManifoldPoint",
    "MomentReport",
    "NaturalParams",
    "SpectralCoeffs",
    "SufficientStats",
    "analyze",
    "cross_validate",
    "density_grid",
    "empirical_moments",
    "eval_basis",
    "fit_map",
    "log_likelihood",
    "log_partition",
    "make_grid",
    "map_rotation",
    "moments",
    "nll_gradient",
    "num_coeffs",
    "posterior",
    "posterior_grid",
    "rotate_spectral",
    "synthesize",
]
