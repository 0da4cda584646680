"""Discrete-time stochastic SEIR model with a random-walk reproduction number.

State per time step: ``(S, E, I, R, rho)`` stored as floats holding exact
integers for the compartments; ``R0 = r0_max * expit(rho)``.  Flows are
binomial, observations negative binomial with size
``effort * p_gamma * p / (1 - p) * I`` and (numpy/scipy) success
probability ``p``, so that the mean count is ``effort * p_gamma * I``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.special import expit, gammaln, logit, xlog1py, xlogy

from ..core import Constrained, FeynmanKacModel, UniformInit
from ..errors import InvalidCounts

S, E, I, R, RHO = range(5)
#: coordinates moved by initial-state random walks: E1, I1 and rho1
FREE = (E, I, RHO)

_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class SeirParams:
    popsize: int = 1638469
    r0_max: float = 10.0
    a: float = 1.0 / 3.0
    gamma: float = 1.0 / 7.0
    effort: float = 0.15
    sigma: float = 0.15
    p: float = 0.13

    def __post_init__(self):
        if self.popsize < 1:
            raise ValueError("popsize must be a positive integer")
        if not 0 < self.effort <= 1:
            raise ValueError("effort must lie in (0, 1]")
        if not 0 < self.p < 1:
            raise ValueError("p must lie in (0, 1)")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    @property
    def p_a(self) -> float:
        return -np.expm1(-self.a)

    @property
    def p_gamma(self) -> float:
        return -np.expm1(-self.gamma)

    def obs_size(self, infected):
        return self.effort * self.p_gamma * self.p / (1.0 - self.p) * infected


def binom_logpmf(k, n, p):
    """log Binom(k; n, p) with the 0 log 0 = 0 convention and -inf off support."""
    k, n = np.asarray(k, float), np.asarray(n, float)
    ok = (k >= 0) & (k <= n)
    kk = np.where(ok, k, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = (gammaln(n + 1) - gammaln(kk + 1) - gammaln(n - kk + 1)
               + xlogy(kk, p) + xlog1py(n - kk, -p))
    return np.where(ok, val, -np.inf)


def negbin_logpmf(y, size, p):
    """log NegBin(y; size, p) (failures before ``size`` successes); size 0 is a point mass at 0."""
    y, size = np.broadcast_arrays(np.asarray(y, float), np.asarray(size, float))
    pos = size > 0
    r = np.where(pos, size, 1.0)
    val = gammaln(y + r) - gammaln(r) - gammaln(y + 1) + r * np.log(p) + y * np.log1p(-p)
    return np.where(pos, val, np.where(y == 0, 0.0, -np.inf))


def transmission_prob(params: SeirParams, rho, infected):
    beta = params.r0_max * expit(rho) * params.p_gamma
    return -np.expm1(-beta * infected / params.popsize)


def initial_domain(popsize: int) -> Constrained:
    """Indicator of S1 + E1 + I1 = popsize, S1, E1, I1 >= 0, R1 = 0."""

    def indicator(x):
        x = np.asarray(x)
        return ((x[..., E] >= 0) & (x[..., I] >= 0) & (x[..., S] >= 0) & (x[..., R] == 0)
                & (x[..., S] + x[..., E] + x[..., I] == popsize))

    def completion(x):
        x = np.array(x, dtype=float)
        x[..., E] = np.round(x[..., E])
        x[..., I] = np.round(x[..., I])
        x[..., R] = 0.0
        x[..., S] = popsize - x[..., E] - x[..., I]
        return x

    return Constrained(indicator=indicator, free=FREE, completion=completion)


class Seir(FeynmanKacModel):
    """Bootstrap Feynman-Kac form of the SEIR model with count data ``y``."""

    dim = 5
    potential_uses_prev = False

    def __init__(self, params: SeirParams, y):
        y = np.asarray(y, dtype=float).ravel()
        if np.any(y < 0) or np.any(y != np.round(y)):
            raise ValueError("observations must be nonnegative integers")
        self.params = params
        self.y = y
        self.T = y.size
        self.m1 = UniformInit(initial_domain(params.popsize))
        self._lgy1 = gammaln(y + 1)

    def with_params(self, **changes) -> "Seir":
        return Seir(replace(self.params, **changes), self.y)

    def sample_transition(self, t, xprev, rng):
        p = self.params
        s, e, i = (xprev[..., c].astype(np.int64) for c in (S, E, I))
        rho = xprev[..., RHO]
        d_e = rng.binomial(s, transmission_prob(p, rho, i))
        d_i = rng.binomial(e, p.p_a)
        d_r = rng.binomial(i, p.p_gamma)
        out = np.empty(xprev.shape)
        out[..., S] = s - d_e
        out[..., E] = e + d_e - d_i
        out[..., I] = i + d_i - d_r
        out[..., R] = xprev[..., R] + d_r
        out[..., RHO] = rho + p.sigma * rng.standard_normal(rho.shape)
        return out

    def log_transition(self, t, xprev, x):
        p = self.params
        d_e = xprev[..., S] - x[..., S]
        d_i = xprev[..., E] + d_e - x[..., E]
        d_r = x[..., R] - xprev[..., R]
        consistent = x[..., I] == xprev[..., I] + d_i - d_r
        lp = (binom_logpmf(d_e, xprev[..., S], transmission_prob(p, xprev[..., RHO], xprev[..., I]))
              + binom_logpmf(d_i, xprev[..., E], p.p_a)
              + binom_logpmf(d_r, xprev[..., I], p.p_gamma))
        z = (x[..., RHO] - xprev[..., RHO]) / p.sigma
        lp = lp - 0.5 * z * z - np.log(p.sigma) - 0.5 * _LOG_2PI
        return np.where(consistent, lp, -np.inf)

    def log_potential(self, t, xprev, x):
        p = self.params
        y = self.y[t]
        size = p.obs_size(x[..., I])
        pos = size > 0
        r = np.where(pos, size, 1.0)
        val = gammaln(y + r) - gammaln(r) - self._lgy1[t] + r * np.log(p.p) + y * np.log1p(-p.p)
        return np.where(pos, val, np.where(y == 0, 0.0, -np.inf))

    def log_density(self, traj):
        traj = np.asarray(traj, dtype=float)
        t = np.arange(self.T)
        total = float(self.m1.log_density(traj[0]))
        if total == -np.inf:
            return total
        total += float(np.sum(self.log_potential(t, None, traj)))
        if self.T > 1:
            total += float(np.sum(self.log_transition(t[1:], traj[:-1], traj[1:])))
        return total

    def r0(self, traj) -> np.ndarray:
        return self.params.r0_max * expit(np.asarray(traj)[..., RHO])


def make_seir(params: SeirParams, y) -> Seir:
    return Seir(params, y)


def check_counts(traj, popsize) -> None:
    """Raise InvalidCounts unless compartments are nonnegative and conserve popsize."""
    c = np.asarray(traj)[..., :4]
    if np.any(c < 0) or np.any(c.sum(axis=-1) != popsize):
        raise InvalidCounts("compartments negative or not conserving the population")


def simulate_seir(params: SeirParams, T: int, x1, rng, r0_path=None):
    """Simulate counts and latent states.

    Args:
        params: model constants.
        T: number of days.
        x1: initial state (S, E, I, R, rho).
        rng: numpy Generator.
        r0_path: optional prescribed R0 per day; when given, rho follows
            ``logit(R0 / r0_max)`` instead of the random walk.

    Returns:
        ``(y, states)`` with shapes (T,) and (T, 5).
    """
    model = Seir(params, np.zeros(T))
    x = np.empty((T, 5))
    x[0] = x1
    if r0_path is not None:
        rho_path = logit(np.asarray(r0_path, dtype=float) / params.r0_max)
        x[0, RHO] = rho_path[0]
    for t in range(1, T):
        x[t] = model.sample_transition(t, x[t - 1][None], rng)[0]
        if r0_path is not None:
            x[t, RHO] = rho_path[t]
    y = sample_observations(params, x[:, I], rng)
    return y, x


def sample_observations(params: SeirParams, infected, rng) -> np.ndarray:
    size = params.obs_size(np.asarray(infected, dtype=float))
    out = np.zeros(size.shape)
    pos = size > 0
    out[pos] = rng.negative_binomial(size[pos], params.p)
    return out
