"""Config-driven experiment harness and command-line interface."""

from .config import ExperimentConfig, from_dict, load_config
from .runner import plan_runs, posterior_predictive, run_experiment

__all__ = ["ExperimentConfig", "from_dict", "load_config", "plan_runs", "posterior_predictive",
           "run_experiment"]
