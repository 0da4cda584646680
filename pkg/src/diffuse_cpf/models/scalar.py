"""Univariate bootstrap models: noisy AR(1) / random walk and stochastic volatility."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..core import FeynmanKacModel, GaussianInit, UniformInit, bootstrap_log_density
from .kalman import LinearGaussianSSM

_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class NoisyArParams:
    """x_{k+1} = rho x_k + N(0, sigma_x^2), y_k = x_k + N(0, sigma_y^2).

    ``sigma_1 = None`` gives the flat (improper) prior on x_1.
    """

    rho: float = 1.0
    sigma_x: float = 1.0
    sigma_y: float = 1.0
    sigma_1: Optional[float] = 10.0

    def __post_init__(self):
        for name in ("sigma_x", "sigma_y"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.sigma_1 is not None and not self.sigma_1 > 0:
            raise ValueError("sigma_1 must be positive (or None for a flat prior)")


@dataclass(frozen=True)
class SvParams:
    """x_{k+1} = x_k + N(0, sigma_x^2), y_k = exp(x_k) N(0, sigma_y^2)."""

    sigma_x: float = 1.0
    sigma_y: float = 1.0
    sigma_1: Optional[float] = 10.0

    def __post_init__(self):
        for name in ("sigma_x", "sigma_y"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.sigma_1 is not None and not self.sigma_1 > 0:
            raise ValueError("sigma_1 must be positive (or None for a flat prior)")


def _initial(sigma_1):
    if sigma_1 is None:
        return UniformInit()
    return GaussianInit(np.zeros(1), np.array([[sigma_1**2]]))


class _GaussianRW(FeynmanKacModel):
    """Shared Gaussian AR(1) dynamics for the scalar models."""

    dim = 1
    rho = 1.0
    potential_uses_prev = False

    def sample_transition(self, t, xprev, rng):
        return self.rho * xprev + self.params.sigma_x * rng.standard_normal(xprev.shape)

    def log_transition(self, t, xprev, x):
        sx = self.params.sigma_x
        z = (x[..., 0] - self.rho * xprev[..., 0]) / sx
        return -0.5 * z * z - np.log(sx) - 0.5 * _LOG_2PI

    def log_density(self, traj):
        return bootstrap_log_density(self, traj)


class NoisyAR(_GaussianRW):
    """Bootstrap Feynman-Kac form of the noisy AR(1); ``rho = 1`` is the RW model."""

    def __init__(self, params: NoisyArParams, y):
        self.params = params
        self.rho = params.rho
        self.y = np.asarray(y, dtype=float).ravel()
        self.T = self.y.size
        self.m1 = _initial(params.sigma_1)
        self._c = -np.log(params.sigma_y) - 0.5 * _LOG_2PI

    def log_potential(self, t, xprev, x):
        z = (self.y[t] - x[..., 0]) / self.params.sigma_y
        return -0.5 * z * z + self._c

    def linear_gaussian(self) -> LinearGaussianSSM:
        p = self.params
        P1 = None if p.sigma_1 is None else [[p.sigma_1**2]]
        return LinearGaussianSSM(F=[[p.rho]], Q=[[p.sigma_x**2]], H=[[1.0]],
                                 R=[[p.sigma_y**2]], y=self.y, m1=[0.0], P1=P1)


class StochasticVolatility(_GaussianRW):
    """Bootstrap SV model: G_k(x) = N(y_k; 0, sigma_y^2 exp(2 x))."""

    def __init__(self, params: SvParams, y):
        self.params = params
        self.y = np.asarray(y, dtype=float).ravel()
        self.T = self.y.size
        self.m1 = _initial(params.sigma_1)
        self._c = -np.log(params.sigma_y) - 0.5 * _LOG_2PI
        self._y2 = self.y**2 / params.sigma_y**2

    def log_potential(self, t, xprev, x):
        x = x[..., 0]
        y2 = self._y2[t]
        with np.errstate(over="ignore", invalid="ignore"):
            quad = np.where(y2 > 0, 0.5 * y2 * np.exp(-2.0 * x), 0.0)
        return self._c - x - quad


def make_noisy_ar(params: NoisyArParams, y) -> NoisyAR:
    return NoisyAR(params, y)


def make_sv(params: SvParams, y) -> StochasticVolatility:
    return StochasticVolatility(params, y)


def simulate_noisy_ar(params: NoisyArParams, T: int, x1, rng):
    """Simulate (y, x) of length T started at ``x1``."""
    x = np.empty(T)
    x[0] = x1
    eta = params.sigma_x * rng.standard_normal(T - 1)
    for k in range(1, T):
        x[k] = params.rho * x[k - 1] + eta[k - 1]
    y = x + params.sigma_y * rng.standard_normal(T)
    return y, x[:, None]


def simulate_sv(params: SvParams, T: int, x1, rng):
    x = x1 + np.concatenate([[0.0], np.cumsum(params.sigma_x * rng.standard_normal(T - 1))])
    y = np.exp(x) * params.sigma_y * rng.standard_normal(T)
    return y, x[:, None]
