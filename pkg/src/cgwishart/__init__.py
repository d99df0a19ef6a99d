"""Bayesian estimation of colored graphical Gaussian (RCON) precision matrices."""

from __future__ import annotations

__version__ = "0.1.0"

from .colored_graph import ColoredGraph, FreeEntryMap, free_entry_map, tree_metadata, validate
from .completion import (
    complete_phi,
    complete_psi,
    is_in_cone,
    log_density_psi,
    log_jacobian_k_to_phi,
    log_jacobian_phi_to_psi,
    project_to_colored,
    reconstruct_k,
    scale_factor,
)
from .diagnostics import acf, autocorrelation, batch_standard_error, nmse
from .exact import GraphFamily, Hyperparams, bind_family, dual_cone_check, exact_mean, log_norm, mc_norm_oracle
from .sampler import ChainConfig, SampleSummary, init_chain, posterior_params, run, run_many, step

__all__ = [
    "ChainConfig",
    "ColoredGraph",
    "FreeEntryMap",
    "GraphFamily",
    "Hyperparams",
    "SampleSummary",
    "acf",
    "autocorrelation",
    "batch_standard_error",
    "bind_family",
    "complete_phi",
    "complete_psi",
    "dual_cone_check",
    "exact_mean",
    "free_entry_map",
    "init_chain",
    "is_in_cone",
    "log_density_psi",
    "log_jacobian_k_to_phi",
    "log_jacobian_phi_to_psi",
    "log_norm",
    "mc_norm_oracle",
    "nmse",
    "posterior_params",
    "project_to_colored",
    "reconstruct_k",
    "run",
    "run_many",
    "scale_factor",
    "step",
    "tree_metadata",
    "validate",
]
