"""Local Bayesian optimization via UCB minimization.

Three outer loops (gradient-step GIBO, MinUCB, look-ahead LA-MinUCB) on top
of a from-scratch Gaussian-process engine with derivative posteriors, plus
benchmark objectives and a seeded experiment harness.
"""
from ._backend import active_backend
from .kernels import KernelSpec, kernel_eval, kernel_grad_x, kernel_cross_hessian
from .gp import (
    Dataset,
    GpModel,
    GpPath,
    NumericalBreakdown,
    VarianceOnlyError,
    condition_inputs_only,
    eval_path,
    eval_path_grad,
    fantasy_update,
    fit,
    grad_cov,
    posterior_mean,
    posterior_mean_grad,
    posterior_var,
    sample_posterior_paths,
    sample_prior_path,
)
from .inner_opt import Box, OptFailure, OptReport, minimize, minimize_matrix

__version__ = "0.1.0"
