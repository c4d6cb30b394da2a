"""Bayesian recovery of a potential in a fractional diffusion from
single-measurement exterior flux data.

The package discretizes the fractional Laplacian on a uniform mesh as a
symmetric Toeplitz operator, solves the exterior-data Dirichlet problem
for nonnegative potentials, evaluates the resulting flux on an exterior
measurement region, and recovers the potential from noisy point
measurements of that flux with a prior-draw Markov chain (greedy or
pCN acceptance).  A verification suite measures the discrete analogues
of the supporting analytic estimates, and a CLI orchestrates
reproducible experiments with byte-stable artifacts.
"""

__version__ = "0.1.0"

from .config import RunConfig, default_config, load_config, parse_config, preset_config, render_config
from .forward import (
    DirichletSolver,
    ForwardModel,
    ForwardSolution,
    Potential,
    SolveError,
    admissible_intervals,
    dn_on_grid,
    eval_G,
    solve_dirichlet,
)
from .grid import BumpDatum, GridFunction, GridSpec, RegionMap, build_grid, classify_regions, sample_phi
from .observation import LinkFunction, MeasurementSet, generate_data, link_apply, log_likelihood, sample_design
from .operator import FracOperator, apply, apply_fft, assemble_dense, build_symbol, quadrature_dn_phi
from .pipeline import build_problem, make_truth, run_pipeline
from .priors import PriorSampler, SievePriorConfig, draw_haar_sieve, draw_piecewise, make_sampler, rescale_draw
from .ratestudy import RateStudyResult, rate_study
from .rng import substream
from .sampler import ChainTrace, SamplerConfig, accept_step, burn_in_mean, pcn_propose, run_chain

__all__ = [
    "__version__",
    "BumpDatum",
    "ChainTrace",
    "DirichletSolver",
    "ForwardModel",
    "ForwardSolution",
    "FracOperator",
    "GridFunction",
    "GridSpec",
    "LinkFunction",
    "MeasurementSet",
    "Potential",
    "PriorSampler",
    "RateStudyResult",
    "RegionMap",
    "RunConfig",
    "SamplerConfig",
    "SievePriorConfig",
    "SolveError",
    "accept_step",
    "admissible_intervals",
    "apply",
    "apply_fft",
    "assemble_dense",
    "build_grid",
    "build_problem",
    "build_symbol",
    "burn_in_mean",
    "classify_regions",
    "default_config",
    "dn_on_grid",
    "draw_haar_sieve",
    "draw_piecewise",
    "eval_G",
    "generate_data",
    "link_apply",
    "load_config",
    "log_likelihood",
    "make_sampler",
    "make_truth",
    "parse_config",
    "pcn_propose",
    "preset_config",
    "quadrature_dn_phi",
    "rate_study",
    "render_config",
    "rescale_draw",
    "run_chain",
    "run_pipeline",
    "sample_design",
    "sample_phi",
    "solve_dirichlet",
    "substream",
]
