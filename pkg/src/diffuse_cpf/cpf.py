"""Conditional particle filter with auxiliary-variable initialisation.

The building blocks follow the usual CPF structure: a forward pass
conditioned on the first-step particles (slot 0 pinned to the reference),
then a path selection by ancestor tracing or backward sampling.  The
AI-CPF step wraps them with a kernel Q reversible w.r.t. M1: a pseudo
state is drawn from Q at the reference's first state and fresh first-step
particles are drawn from Q at the pseudo state.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .core import FeynmanKacModel, ParticleSystem
from .errors import AllWeightsZero
from .kernels import InitKernel, exact_m1_kernel

__all__ = [
    "PathSelector",
    "AdaptData",
    "forward_cpf",
    "pick_path_at",
    "pick_path_bs",
    "pick_path",
    "path_from_indices",
    "ai_cpf_step",
    "cpf_bs_step",
]


class PathSelector(str, enum.Enum):
    ANCESTOR_TRACING = "at"
    BACKWARD_SAMPLING = "bs"


@dataclass
class AdaptData:
    """What an AI-CPF step hands to the adaptation rule.

    Attributes:
        b1: 0-based index of the selected first-step particle.
        first_weights: backward weights V at the first step (BS), or the
            filter weights W at the first step (AT).
        first_particles: (N, d) first-step particles.
        selector: the path selector that produced this data.
    """

    b1: int
    first_weights: np.ndarray
    first_particles: np.ndarray
    selector: PathSelector

    @property
    def alpha(self) -> float:
        """Probability that the reference's first state is *not* retained."""
        return 1.0 - float(self.first_weights[0])

    @property
    def selected(self) -> np.ndarray:
        return self.first_particles[self.b1]


def _normalise_row(lw):
    m = lw.max()
    if m == -np.inf:
        raise AllWeightsZero("all particle weights are zero")
    w = np.exp(lw - m)
    s = w.sum()
    return w / s, lw - (m + np.log(s))


def _unnormalised(lw):
    m = lw.max()
    if m == -np.inf:
        raise AllWeightsZero("all particle weights are zero")
    return np.exp(lw - m)


def _draw(w, u):
    """Inverse-CDF draw(s) from unnormalised weights ``w`` with uniforms ``u``."""
    c = w.cumsum()
    i = c.searchsorted(u * c[-1], side="right")
    return np.minimum(i, len(c) - 1)


def _as_row(v, N):
    return v if np.ndim(v) == 1 else np.full(N, v, dtype=float)


def forward_cpf(ref, first_particles, model: FeynmanKacModel, rng, start: int = 0,
                x_fixed=None) -> ParticleSystem:
    """Forward CPF conditioned on the first-step particles.

    Args:
        ref: (T, d) reference trajectory; entries before ``start + 1`` are
            not read.
        first_particles: (N, d) particles at time ``start``; row 0 must be
            the reference state.
        model: the Feynman-Kac model.
        rng: numpy Generator.
        start: time index of the first filtered state.  ``start > 0``
            runs the filter on the tail x_{start:T} with x_{start-1}
            held at ``x_fixed``.
        x_fixed: the fixed preceding state when ``start > 0``.

    Returns:
        ParticleSystem with slot 0 reproducing the reference.

    Raises:
        AllWeightsZero: if every particle has zero potential at some step.
    """
    first = np.asarray(first_particles, dtype=float)
    N, d = first.shape
    L = model.T - start
    X = np.empty((L, N, d))
    LW = np.empty((L, N))
    A = np.zeros((max(L - 1, 0), N), dtype=np.intp)
    X[0] = first
    prev = None if start == 0 else np.broadcast_to(np.asarray(x_fixed, dtype=float), (N, d))
    U = rng.random((max(L - 1, 0), N - 1))
    log_potential, sample_transition = model.log_potential, model.sample_transition
    for s in range(L):
        t = start + s
        LW[s] = _as_row(log_potential(t, prev, X[s]), N)
        if s < L - 1:
            w = _unnormalised(LW[s])
            anc = A[s]
            anc[1:] = _draw(w, U[s])
            prev = X[s][anc]
            if N > 1:
                X[s + 1, 1:] = sample_transition(t + 1, prev[1:], rng)
            X[s + 1, 0] = ref[t + 1]
    m = LW.max(axis=1, keepdims=True)
    if np.any(m == -np.inf):
        raise AllWeightsZero("all particle weights are zero")
    W = np.exp(LW - m)
    tot = W.sum(axis=1, keepdims=True)
    W /= tot
    LW = LW - (m + np.log(tot))
    return ParticleSystem(particles=X, weights=W, log_weights=LW, ancestors=A, start=start)


def path_from_indices(ps: ParticleSystem, B) -> np.ndarray:
    """The trajectory (X_t^{(B_t)})_t picked out by index vector ``B``."""
    return ps.particles[np.arange(ps.length), B]


def pick_path_at(ps: ParticleSystem, rng):
    """Ancestor tracing.

    Returns:
        ``(B, AdaptData)`` with 0-based indices B over the stored steps.
    """
    L = ps.length
    B = np.empty(L, dtype=np.intp)
    B[-1] = _draw(ps.weights[-1], rng.random())
    for s in range(L - 2, -1, -1):
        B[s] = ps.ancestors[s, B[s + 1]]
    data = AdaptData(int(B[0]), ps.weights[0], ps.particles[0], PathSelector.ANCESTOR_TRACING)
    return B, data


def pick_path_bs(ps: ParticleSystem, model: FeynmanKacModel, rng):
    """Backward sampling.

    The first-step weights in the returned AdaptData are the normalised
    backward weights V at the first stored step (the filter weights when
    only one step is stored).
    """
    L = ps.length
    X, LW = ps.particles, ps.log_weights
    u = rng.random(L)
    B = np.empty(L, dtype=np.intp)
    v = ps.weights[-1]
    B[-1] = _draw(v, u[-1])
    log_transition, log_potential = model.log_transition, model.log_potential
    uses_prev = model.potential_uses_prev
    for s in range(L - 2, -1, -1):
        t = ps.start + s + 1
        xn = X[s + 1, B[s + 1]]
        lv = LW[s] + log_transition(t, X[s], xn)
        if uses_prev:
            lv = lv + log_potential(t, X[s], xn)
        if s == 0:
            v, _ = _normalise_row(_as_row(lv, ps.N))
        else:
            v = _unnormalised(lv)
        B[s] = _draw(v, u[s])
    data = AdaptData(int(B[0]), v, X[0], PathSelector.BACKWARD_SAMPLING)
    return B, data


def pick_path(ps: ParticleSystem, model: FeynmanKacModel, rng, selector=PathSelector.BACKWARD_SAMPLING):
    selector = PathSelector(selector)
    if selector is PathSelector.BACKWARD_SAMPLING:
        return pick_path_bs(ps, model, rng)
    return pick_path_at(ps, rng)


def ai_cpf_step(ref, kernel: InitKernel, model: FeynmanKacModel, N: int, rng,
                selector=PathSelector.BACKWARD_SAMPLING):
    """One AI-CPF update of the reference trajectory.

    Returns:
        ``(trajectory, AdaptData)``.  The map ref -> trajectory leaves the
        smoothing distribution invariant.
    """
    selector = PathSelector(selector)
    if selector is PathSelector.BACKWARD_SAMPLING and not model.has_transition_density:
        raise ValueError("backward sampling needs the model's transition density")
    ref = np.asarray(ref, dtype=float)
    first = np.empty((N, model.dim))
    first[0] = ref[0]
    x0 = kernel.sample(ref[0], rng)
    if N > 1:
        first[1:] = kernel.draw(x0, N - 1, rng)
    ps = forward_cpf(ref, first, model, rng)
    B, data = pick_path(ps, model, rng, selector)
    return path_from_indices(ps, B), data


def cpf_bs_step(ref, model: FeynmanKacModel, N: int, rng):
    """Classic CPF with backward sampling (Q = M1)."""
    return ai_cpf_step(ref, exact_m1_kernel(model.m1), model, N, rng,
                       PathSelector.BACKWARD_SAMPLING)
