"""M1-reversible auxiliary kernels and a statistical reversibility check.

Each kernel maps a state ``x`` (shape ``(d,)`` or ``(n, d)``) to a new
state of the same shape.  Reversibility with respect to the initial
measure is what makes the auxiliary-variable CPF exact, so it is checked
empirically by :func:`reversibility_test`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .core import Domain, GaussianInit, InitialMeasure, Unbounded
from .errors import ImproperInitError, StartOutsideDomain

__all__ = [
    "InitKernel",
    "CrankNicolsonKernel",
    "RandomWalkKernel",
    "ExactInitKernel",
    "cn_sample",
    "rw_mh_sample",
    "exact_m1_kernel",
    "safe_cholesky",
    "stationary_starts",
    "ReversibilityReport",
    "reversibility_test",
]


def safe_cholesky(cov) -> np.ndarray:
    """Lower Cholesky factor, adding diagonal jitter if factorisation fails."""
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        d = cov.shape[0]
        jitter = 1e-10 * max(np.trace(cov) / d, 1e-300)
        for _ in range(20):
            try:
                return np.linalg.cholesky(cov + jitter * np.eye(d))
            except np.linalg.LinAlgError:
                jitter *= 10.0
        raise


class InitKernel:
    """A Markov kernel Q reversible with respect to an initial measure."""

    is_exact_m1_draw = False

    def sample(self, x, rng) -> np.ndarray:
        raise NotImplementedError

    def draw(self, x, n: int, rng) -> np.ndarray:
        """``n`` independent draws from Q(x, .), shape (n, d)."""
        x = np.asarray(x, dtype=float)
        return self.sample(np.broadcast_to(x, (n, x.size)), rng)


@dataclass(frozen=True, eq=False)
class CrankNicolsonKernel(InitKernel):
    """Autoregressive kernel reversible w.r.t. N(mean, cov).

    ``Z = sqrt(1 - beta^2) (x - mean) + beta W + mean`` with W ~ N(0, cov).
    ``beta = 1`` gives independent draws from N(mean, cov).
    """

    mean: np.ndarray
    cov: np.ndarray
    beta: float
    chol: np.ndarray = field(init=False)

    def __post_init__(self):
        if not 0.0 < self.beta <= 1.0:
            raise ValueError(f"beta must lie in (0, 1], got {self.beta}")
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "chol", safe_cholesky(cov))

    @classmethod
    def for_measure(cls, m1: GaussianInit, beta: float) -> "CrankNicolsonKernel":
        return cls(m1.mean, m1.cov, beta)

    @property
    def is_exact_m1_draw(self):
        return self.beta == 1.0

    def sample(self, x, rng) -> np.ndarray:
        return cn_sample(self, x, rng)


def cn_sample(kernel: CrankNicolsonKernel, x, rng=None, noise=None) -> np.ndarray:
    """Crank-Nicolson move; ``noise`` overrides the N(0, cov) draw W."""
    x = np.asarray(x, dtype=float)
    if noise is None:
        noise = rng.standard_normal(x.shape) @ kernel.chol.T
    rho = np.sqrt(1.0 - kernel.beta**2)
    return rho * (x - kernel.mean) + kernel.beta * np.asarray(noise) + kernel.mean


@dataclass(frozen=True, eq=False)
class RandomWalkKernel(InitKernel):
    """Gaussian random walk, with Metropolis rejection outside ``domain``.

    The initial measure is the indicator of ``domain`` so a proposal is
    accepted exactly when it lands inside.  For constrained domains only
    the domain's free coordinates move (``cov`` is over those) and the
    domain's completion map fixes the remaining ones.
    """

    cov: np.ndarray
    domain: Domain = field(default_factory=Unbounded)
    chol: np.ndarray = field(init=False)

    def __post_init__(self):
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "chol", safe_cholesky(cov))

    def sample(self, x, rng) -> np.ndarray:
        return rw_mh_sample(self, x, rng)[0]


def rw_mh_sample(kernel: RandomWalkKernel, x, rng=None, increment=None):
    """One random-walk Metropolis move targeting the domain indicator.

    Args:
        kernel: the random-walk kernel.
        x: current state(s), ``(d,)`` or ``(n, d)``.
        rng: numpy Generator.
        increment: optional fixed increment in the free coordinates
            (replaces ``chol @ z``).

    Returns:
        ``(y, accepted)``; rejected rows keep their current value.

    Raises:
        StartOutsideDomain: if some row of ``x`` lies outside the domain.
    """
    x = np.asarray(x, dtype=float)
    domain = kernel.domain
    bounded = domain.constrained
    if bounded and not np.all(domain.contains(x)):
        raise StartOutsideDomain("random-walk kernel started outside its domain")
    free = domain.free
    k = kernel.chol.shape[0]
    if increment is None:
        increment = rng.standard_normal(x.shape[:-1] + (k,)) @ kernel.chol.T
    y = x.copy()
    if free is None:
        y += increment
    else:
        y[..., list(free)] += increment
    if not bounded:
        return y, np.ones(x.shape[:-1], dtype=bool)
    y = domain.complete(y)
    accepted = domain.contains(y)
    y = np.where(accepted[..., None], y, x)
    return y, accepted


@dataclass(frozen=True, eq=False)
class ExactInitKernel(InitKernel):
    """Q(x, .) = M1: ignores x and draws from the (proper) initial measure."""

    m1: GaussianInit
    is_exact_m1_draw = True

    def sample(self, x, rng) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return self.m1.sample(rng)
        return self.m1.sample(rng, size=x.shape[0])


def exact_m1_kernel(m1: InitialMeasure) -> ExactInitKernel:
    if not isinstance(m1, GaussianInit):
        raise ImproperInitError("exact initial draws need a Gaussian initial measure")
    return ExactInitKernel(m1)


# ---------------------------------------------------------------------------
# Reversibility harness
# ---------------------------------------------------------------------------


def stationary_starts(kernel: InitKernel, x0, n_steps: int, rng) -> np.ndarray:
    """Run independent copies of ``kernel`` from rows of ``x0`` for ``n_steps``."""
    x = np.array(x0, dtype=float)
    for _ in range(n_steps):
        x = kernel.sample(x, rng)
    return x


@dataclass
class ReversibilityReport:
    pvalues: dict
    alpha: float

    @property
    def passed(self) -> bool:
        return all(p > self.alpha for p in self.pvalues.values())

    @property
    def min_pvalue(self) -> float:
        return min(self.pvalues.values())


def _projections(a, b):
    return {
        "marginal": a,
        "difference": b - a,
        "weighted_sum": a + 2.0 * b,
        "product": a * b**2,
    }


def reversibility_test(kernel: InitKernel, starts, rng, alpha: float = 1e-3, direction=None):
    """Two-sample check that (X0, X1) and (X1, X0) have the same law.

    ``starts`` are draws from M1 (or approximately stationary states).
    The pairs are split in half; the first half contributes (X0, X1), the
    second the swapped (X1, X0), so the two samples are independent.  Both
    are projected on a direction and compared through several asymmetric
    statistics with Kolmogorov-Smirnov tests.
    """
    x0 = np.asarray(starts, dtype=float)
    if x0.ndim == 1:
        x0 = x0[:, None]
    x1 = kernel.sample(x0, rng)
    d = x0.shape[1]
    if direction is None:
        direction = np.ones(d) / np.sqrt(d)
    s0, s1 = x0 @ direction, x1 @ direction
    half = len(s0) // 2
    fwd = _projections(s0[:half], s1[:half])
    bwd = _projections(s1[half:], s0[half:])
    pvalues = {name: float(stats.ks_2samp(fwd[name], bwd[name]).pvalue) for name in fwd}
    return ReversibilityReport(pvalues=pvalues, alpha=alpha)
