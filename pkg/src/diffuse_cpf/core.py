"""Feynman-Kac model abstraction, particle storage and weight handling.

A smoothing target is represented as

    pi(dx_{1:T}) ∝ M1(dx_1) G_1(x_1) prod_{k>=2} M_k(x_{k-1}, dx_k) G_k(x_{k-1}, x_k)

where ``M1`` may be an improper (uniform) measure.  Time indices are
0-based in code (``t = 0`` is the first state) and particle slot 0 always
holds the reference trajectory.  Everything is computed in log space.
"""

from __future__ import annotations

import zlib
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import solve_triangular

from .errors import AllWeightsZero, ImproperInitError

__all__ = [
    "make_rng",
    "Domain",
    "Unbounded",
    "Box",
    "Constrained",
    "InitialMeasure",
    "GaussianInit",
    "UniformInit",
    "FeynmanKacModel",
    "ParticleSystem",
    "normalize_weights",
    "categorical_sample",
    "simulate_prior_trajectory",
    "bootstrap_log_density",
]


def _stream_key(key) -> int:
    if isinstance(key, str):
        return zlib.crc32(key.encode())
    return int(key)


def make_rng(seed: int, *stream) -> np.random.Generator:
    """Deterministic random stream for ``(seed, *stream)``.

    Stream components may be integers or strings (hashed with CRC32).
    Distinct stream keys give statistically independent generators via
    :class:`numpy.random.SeedSequence` spawn keys.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_stream_key(k) for k in stream))
    return np.random.Generator(np.random.PCG64(ss))


# ---------------------------------------------------------------------------
# Domains and initial measures
# ---------------------------------------------------------------------------


class Domain:
    """The whole of R^d.  Subclasses restrict it."""

    #: coordinates moved by random-walk proposals (``None`` means all)
    free: Optional[tuple] = None
    constrained = False

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.ones(x.shape[:-1], dtype=bool)

    def complete(self, x: np.ndarray) -> np.ndarray:
        """Map a moved state onto the domain's parametrisation (identity here)."""
        return x


class Unbounded(Domain):
    pass


@dataclass(frozen=True, eq=False)
class Box(Domain):
    """Axis-aligned box; bounds may be infinite."""

    lower: np.ndarray
    upper: np.ndarray
    constrained = True

    def __post_init__(self):
        object.__setattr__(self, "lower", np.atleast_1d(np.asarray(self.lower, dtype=float)))
        object.__setattr__(self, "upper", np.atleast_1d(np.asarray(self.upper, dtype=float)))
        if np.any(self.lower >= self.upper):
            raise ValueError("Box needs lower < upper in every coordinate")

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.lower) & (x <= self.upper), axis=-1)


@dataclass(frozen=True, eq=False)
class Constrained(Domain):
    """Domain given by an indicator plus a completion map.

    Random-walk proposals move only the ``free`` coordinates; ``complete``
    then fills in the dependent ones (e.g. rounding counts and setting
    the remaining compartment from a conservation law).
    """

    indicator: Callable[[np.ndarray], np.ndarray]
    free: tuple = None
    completion: Optional[Callable[[np.ndarray], np.ndarray]] = None
    constrained = True

    def contains(self, x) -> np.ndarray:
        return np.asarray(self.indicator(np.asarray(x, dtype=float)), dtype=bool)

    def complete(self, x: np.ndarray) -> np.ndarray:
        return x if self.completion is None else self.completion(x)


class InitialMeasure(ABC):
    domain: Domain

    @abstractmethod
    def log_density(self, x) -> np.ndarray:
        """Log density w.r.t. Lebesgue (or counting) measure, up to a constant."""

    def sample(self, rng, size=None):
        raise ImproperInitError(f"{type(self).__name__} has no normalised sampler")


@dataclass(frozen=True, eq=False)
class GaussianInit(InitialMeasure):
    mean: np.ndarray
    cov: np.ndarray
    domain: Domain = field(default_factory=Unbounded)

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if cov.shape != (mean.size, mean.size):
            raise ValueError("covariance shape does not match mean")
        if not np.allclose(cov, cov.T):
            raise ValueError("covariance must be symmetric")
        chol = np.linalg.cholesky(cov)  # raises LinAlgError unless SPD
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "_chol", chol)
        object.__setattr__(self, "_logdet", 2.0 * np.log(np.diag(chol)).sum())

    @property
    def chol(self) -> np.ndarray:
        return self._chol

    def log_density(self, x) -> np.ndarray:
        diff = np.asarray(x, dtype=float) - self.mean
        d = self.mean.size
        z = solve_triangular(self._chol, diff.reshape(-1, d).T, lower=True)
        quad = np.sum(z**2, axis=0).reshape(diff.shape[:-1])
        return -0.5 * (quad + self._logdet + d * np.log(2 * np.pi))

    def sample(self, rng, size=None):
        shape = (self.mean.size,) if size is None else (size, self.mean.size)
        z = rng.standard_normal(shape)
        return self.mean + z @ self._chol.T


@dataclass(frozen=True, eq=False)
class UniformInit(InitialMeasure):
    """Indicator of ``domain``; improper when the domain is unbounded."""

    domain: Domain = field(default_factory=Unbounded)

    def log_density(self, x) -> np.ndarray:
        return np.where(self.domain.contains(x), 0.0, -np.inf)


# ---------------------------------------------------------------------------
# Models and particle systems
# ---------------------------------------------------------------------------


class FeynmanKacModel(ABC):
    """Initial measure, Markov transitions and two-argument potentials.

    Subclasses set ``T``, ``dim`` and ``m1`` and implement the vectorised
    methods below.  ``t`` is the 0-based time of the *new* state; arrays
    carry particles along the leading axis and coordinates on the last.
    """

    T: int
    dim: int
    m1: InitialMeasure
    has_transition_density: bool = True
    #: ``False`` when G_t depends on the new state only; backward sampling
    #: then skips the potential, which is constant across particles
    potential_uses_prev: bool = True

    @abstractmethod
    def sample_transition(self, t: int, xprev: np.ndarray, rng) -> np.ndarray:
        """Draw x_t ~ M_t(xprev, .) for every row of ``xprev`` (t >= 1)."""

    def log_transition(self, t: int, xprev: np.ndarray, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} has no transition density")

    @abstractmethod
    def log_potential(self, t: int, xprev: Optional[np.ndarray], x: np.ndarray) -> np.ndarray:
        """log G_t(xprev, x); ``xprev`` is ``None`` at t = 0.  Never NaN."""

    def log_density(self, traj: np.ndarray) -> float:
        """Unnormalised log smoothing density of a full (T, d) trajectory."""
        traj = np.asarray(traj, dtype=float)
        total = float(self.m1.log_density(traj[0])) + float(self.log_potential(0, None, traj[0]))
        for t in range(1, self.T):
            if total == -np.inf:
                return total
            total += float(self.log_transition(t, traj[t - 1], traj[t]))
            total += float(self.log_potential(t, traj[t - 1], traj[t]))
        return total


def bootstrap_log_density(model: FeynmanKacModel, traj) -> float:
    """Vectorised :meth:`FeynmanKacModel.log_density` for models whose
    potentials ignore the previous state and accept array time indices."""
    traj = np.asarray(traj, dtype=float)
    t = np.arange(model.T)
    total = float(model.m1.log_density(traj[0]))
    total += float(np.sum(model.log_potential(t, None, traj)))
    if model.T > 1:
        total += float(np.sum(model.log_transition(t[1:], traj[:-1], traj[1:])))
    return total


@dataclass
class ParticleSystem:
    """Output of a forward conditional particle filter.

    Attributes:
        particles: (T', N, d) particle values.
        weights: (T', N) normalised weights.
        log_weights: (T', N) logarithms of ``weights``.
        ancestors: (T'-1, N) 0-based ancestor indices; column 0 is all zeros.
        start: absolute time of the first stored step (non-zero when a
            leading block of states is held fixed, as in DPG-BS).
    """

    particles: np.ndarray
    weights: np.ndarray
    log_weights: np.ndarray
    ancestors: np.ndarray
    start: int = 0

    @property
    def N(self) -> int:
        return self.particles.shape[1]

    @property
    def length(self) -> int:
        return self.particles.shape[0]


def normalize_weights(log_weights) -> tuple[np.ndarray, float]:
    """Normalise log weights.

    Returns:
        ``(probs, log_mean)`` where ``log_mean`` is the log of the average
        unnormalised weight.

    Raises:
        AllWeightsZero: if every entry is ``-inf``.
    """
    lw = np.asarray(log_weights, dtype=float)
    m = lw.max()
    if m == -np.inf:
        raise AllWeightsZero("all particle weights are zero")
    w = np.exp(lw - m)
    s = w.sum()
    return w / s, m + np.log(s / lw.size)


def categorical_sample(rng, probs, size=None):
    """Draw 0-based indices with ``Pr(i) = probs[i]``.

    Inverse-CDF on the cumulative sum; zero-probability entries are never
    selected.
    """
    c = np.cumsum(probs)
    u = rng.random(size) * c[-1]
    idx = np.searchsorted(c, u, side="right")
    return np.minimum(idx, len(c) - 1)


def simulate_prior_trajectory(model: FeynmanKacModel, x1, rng) -> np.ndarray:
    """Simulate x_{2:T} from the model dynamics started at ``x1``."""
    traj = np.empty((model.T, model.dim))
    traj[0] = x1
    for t in range(1, model.T):
        traj[t] = model.sample_transition(t, traj[t - 1][None, :], rng)[0]
    return traj
