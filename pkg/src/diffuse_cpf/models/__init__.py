"""Experiment models, simulators and the Kalman oracle."""

from .data import (
    default_seir_x1,
    params_for,
    piecewise_r0,
    read_dataset,
    read_truth,
    simulate_dataset,
    write_dataset,
    write_truth,
)
from .kalman import LinearGaussianSSM, ffbs_sample, kalman_filter, kalman_smoother
from .mvn import MvnStatic, MvnStaticParams, make_mvn_static
from .scalar import (
    NoisyAR,
    NoisyArParams,
    StochasticVolatility,
    SvParams,
    make_noisy_ar,
    make_sv,
    simulate_noisy_ar,
    simulate_sv,
)
from .seir import Seir, SeirParams, check_counts, make_seir, sample_observations, simulate_seir

__all__ = [
    "LinearGaussianSSM",
    "MvnStatic",
    "MvnStaticParams",
    "NoisyAR",
    "NoisyArParams",
    "Seir",
    "SeirParams",
    "StochasticVolatility",
    "SvParams",
    "check_counts",
    "default_seir_x1",
    "ffbs_sample",
    "kalman_filter",
    "kalman_smoother",
    "make_mvn_static",
    "make_noisy_ar",
    "make_seir",
    "make_sv",
    "params_for",
    "piecewise_r0",
    "read_dataset",
    "read_truth",
    "sample_observations",
    "simulate_dataset",
    "simulate_noisy_ar",
    "simulate_seir",
    "simulate_sv",
    "write_dataset",
    "write_truth",
]
