"""Conditional particle filters with diffuse initial distributions."""

from .adapt import (
    AmAdapter,
    AswamAdapter,
    DgiAdapter,
    FixedAdapter,
    RamState,
    am_update,
    aswam_update,
    dgi_scale_update,
    project_stability,
    ram_update,
    step_size,
)
from .core import (
    Box,
    Constrained,
    FeynmanKacModel,
    GaussianInit,
    UniformInit,
    Unbounded,
    make_rng,
)
from .cpf import AdaptData, PathSelector, ai_cpf_step, cpf_bs_step, forward_cpf, pick_path
from .diagnostics import acf, chain_stats, iact, ire, mean_ci, neff
from .drivers import ChainRecord, HyperModel, aai_cpf_run, aai_pg_run, dpg_bs_run
from .errors import *  # noqa: F401,F403
from .kernels import (
    CrankNicolsonKernel,
    RandomWalkKernel,
    exact_m1_kernel,
    reversibility_test,
)

__version__ = "0.1.0"
