"""Static multivariate normal target with a flat initial measure (T = 1)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import FeynmanKacModel, UniformInit


@dataclass(frozen=True)
class MvnStaticParams:
    dim: int = 1
    sigma: float = 1.0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be at least 1")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")


class MvnStatic(FeynmanKacModel):
    """G_1(x) = N(x; 0, sigma^2 I_d) with M1 = Lebesgue measure."""

    T = 1
    potential_uses_prev = False

    def __init__(self, params: MvnStaticParams):
        self.params = params
        self.dim = params.dim
        self.m1 = UniformInit()
        self._c = -params.dim * (np.log(params.sigma) + 0.5 * np.log(2.0 * np.pi))

    def sample_transition(self, t, xprev, rng):
        raise IndexError("static model has a single time step")

    def log_potential(self, t, xprev, x):
        return self._c - 0.5 * np.sum(x * x, axis=-1) / self.params.sigma**2


def make_mvn_static(params: MvnStaticParams) -> MvnStatic:
    return MvnStatic(params)
