"""On-line adaptation of the auxiliary kernels and of Metropolis proposals.

Rules (all with step sizes ``eta_j = min(eta_max, j^-gamma)``):

* AM: mean/covariance of the selected first state, kernel covariance ``c Sigma``.
* ASWAM: Rao-Blackwellised mean/covariance using the backward weights of
  all first-step particles, plus a log-scale ``delta`` driven by the
  acceptance rate ``alpha = 1 - V_1[0]``; kernel covariance ``e^delta Sigma``.
* DGI scaling: ``varsigma`` driven by the same acceptance rate, with the
  Crank-Nicolson parameter ``beta = expit(varsigma)``.
* RAM: rank-one update of a lower-triangular proposal factor.

States are immutable dataclasses; every update returns a new state.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.special import expit

from .core import Domain, GaussianInit, Unbounded
from .cpf import AdaptData, PathSelector
from .errors import SelectorMismatch
from .kernels import CrankNicolsonKernel, InitKernel, RandomWalkKernel

__all__ = [
    "DEFAULT_ALPHA_TARGET",
    "RAM_ALPHA_TARGET",
    "step_size",
    "AmState",
    "AswamState",
    "DgiScaleState",
    "RamState",
    "am_update",
    "aswam_update",
    "dgi_scale_update",
    "ram_update",
    "project_stability",
    "Adapter",
    "FixedAdapter",
    "AmAdapter",
    "AswamAdapter",
    "DgiAdapter",
]

DEFAULT_ALPHA_TARGET = 0.8
RAM_ALPHA_TARGET = 0.441
DELTA_CLAMP = 30.0
VARSIGMA_CLAMP = 15.0


def step_size(j: int, gamma: float = 0.66, eta_max: float = 0.5) -> float:
    """eta_j = min(eta_max, j^-gamma) for j >= 1."""
    if j < 1:
        raise ValueError("step index starts at 1")
    return min(eta_max, float(j) ** (-gamma))


def _symmetrise(a):
    return 0.5 * (a + a.T)


@dataclass(frozen=True, eq=False)
class AmState:
    mu: np.ndarray
    sigma: np.ndarray
    c: float

    def kernel_cov(self) -> np.ndarray:
        return self.c * self.sigma


@dataclass(frozen=True, eq=False)
class AswamState:
    mu: np.ndarray
    sigma: np.ndarray
    delta: float = 0.0
    alpha_target: float = DEFAULT_ALPHA_TARGET

    def kernel_cov(self) -> np.ndarray:
        return np.exp(self.delta) * self.sigma


@dataclass(frozen=True)
class DgiScaleState:
    varsigma: float = 0.0
    alpha_target: float = DEFAULT_ALPHA_TARGET

    @property
    def beta(self) -> float:
        return float(expit(self.varsigma))


@dataclass(frozen=True, eq=False)
class RamState:
    S: np.ndarray
    alpha_target: float = RAM_ALPHA_TARGET
    eta_max: float = 0.5
    gamma: float = 0.66

    @classmethod
    def identity(cls, d: int, **kw) -> "RamState":
        return cls(np.eye(d), **kw)


def am_update(state: AmState, x1_selected, j: int, eta: Optional[float] = None) -> AmState:
    """Covariance adaptation from the selected first state.

    The covariance recursion uses the mean *before* this update.
    """
    eta = step_size(j) if eta is None else eta
    x = np.asarray(x1_selected, dtype=float)
    diff = x - state.mu
    mu = (1.0 - eta) * state.mu + eta * x
    sigma = _symmetrise((1.0 - eta) * state.sigma + eta * np.outer(diff, diff))
    return replace(state, mu=mu, sigma=sigma)


def _require_bs(data: AdaptData):
    if PathSelector(data.selector) is not PathSelector.BACKWARD_SAMPLING:
        raise SelectorMismatch("acceptance-rate adaptation needs backward-sampling weights")


def aswam_update(state: AswamState, data: AdaptData, j: int, eta: Optional[float] = None,
                 free=None) -> AswamState:
    """Rao-Blackwellised mean/covariance and log-scale update.

    Args:
        state: current state.
        data: output of a backward-sampling AI-CPF step.
        j: iteration index (>= 1).
        eta: optional step size override.
        free: coordinates the kernel moves (all when ``None``).

    Raises:
        SelectorMismatch: if ``data`` came from ancestor tracing.
    """
    _require_bs(data)
    eta = step_size(j) if eta is None else eta
    X = np.asarray(data.first_particles, dtype=float)
    if free is not None:
        X = X[:, list(free)]
    v = np.asarray(data.first_weights, dtype=float)
    diff = X - state.mu
    mu = (1.0 - eta) * state.mu + eta * (v @ X)
    sigma = _symmetrise((1.0 - eta) * state.sigma + eta * (diff.T * v) @ diff)
    delta = state.delta + eta * (data.alpha - state.alpha_target)
    delta = float(np.clip(delta, -DELTA_CLAMP, DELTA_CLAMP))
    return replace(state, mu=mu, sigma=sigma, delta=delta)


def dgi_scale_update(state: DgiScaleState, data: AdaptData, j: int,
                     eta: Optional[float] = None) -> DgiScaleState:
    _require_bs(data)
    eta = step_size(j) if eta is None else eta
    vs = state.varsigma + eta * (data.alpha - state.alpha_target)
    return replace(state, varsigma=float(np.clip(vs, -VARSIGMA_CLAMP, VARSIGMA_CLAMP)))


def ram_update(state: RamState, U, alpha: float, n: int, eta: Optional[float] = None) -> RamState:
    """S_n S_n^T = S (I + eta_n (alpha - alpha*) U U^T / |U|^2) S^T.

    ``eta_n = min(eta_max, d n^-gamma)`` unless overridden.
    """
    U = np.atleast_1d(np.asarray(U, dtype=float))
    d = U.size
    if eta is None:
        eta = min(state.eta_max, d * float(n) ** (-state.gamma))
    coef = eta * (alpha - state.alpha_target)
    norm2 = float(U @ U)
    if coef == 0.0 or norm2 == 0.0:
        return state
    su = state.S @ U
    M = state.S @ state.S.T + (coef / norm2) * np.outer(su, su)
    return replace(state, S=np.linalg.cholesky(_symmetrise(M)))


def project_stability(sigma, delta: Optional[float], eps: float):
    """Floor eigenvalues of ``sigma`` at ``eps`` and clamp ``delta`` to [log eps, -log eps].

    Inputs already satisfying the constraints are returned as the same
    objects.
    """
    sigma = np.asarray(sigma, dtype=float)
    w, V = np.linalg.eigh(sigma)
    if w.min() < eps:
        sigma = _symmetrise((V * np.maximum(w, eps)) @ V.T)
    if delta is not None:
        lo = np.log(eps)
        if not lo <= delta <= -lo:
            delta = float(np.clip(delta, lo, -lo))
    return sigma, delta


def _violates(sigma, delta, eps) -> bool:
    if np.linalg.eigvalsh(sigma).min() < eps:
        return True
    return delta is not None and not np.log(eps) <= delta <= -np.log(eps)


# ---------------------------------------------------------------------------
# Adapters: a kernel family plus the rule that tunes it
# ---------------------------------------------------------------------------


class Adapter:
    """Owns an adaptation state and exposes the current auxiliary kernel."""

    rule = "fixed"

    @property
    def kernel(self) -> InitKernel:
        raise NotImplementedError

    def update(self, data: AdaptData, j: int) -> None:
        pass

    def summary(self) -> dict:
        return {}


@dataclass
class FixedAdapter(Adapter):
    fixed_kernel: InitKernel

    @property
    def kernel(self) -> InitKernel:
        return self.fixed_kernel


@dataclass
class _CovAdapter(Adapter):
    """Shared stabilisation switch of the AM and ASWAM adapters.

    ``stabilise`` is ``"off"`` (default), ``"project"`` (eigenvalue floor
    and delta clamp) or ``"reject"`` (keep the previous state whenever the
    update leaves the stability set).
    """

    domain: Domain = field(default_factory=Unbounded)
    stabilise: str = "off"
    eps: float = 1e-6
    step: Callable[[int], float] = step_size
    _kernel: Optional[RandomWalkKernel] = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if self.stabilise not in ("off", "project", "reject"):
            raise ValueError(f"unknown stabilisation mode {self.stabilise!r}")

    @property
    def free(self):
        return self.domain.free

    @property
    def kernel(self) -> RandomWalkKernel:
        if self._kernel is None:
            self._kernel = RandomWalkKernel(self.state.kernel_cov(), self.domain)
        return self._kernel

    def _accept(self, new):
        delta = getattr(new, "delta", None)
        if self.stabilise == "project":
            sigma, delta = project_stability(new.sigma, delta, self.eps)
            new = replace(new, sigma=sigma) if delta is None else replace(new, sigma=sigma, delta=delta)
        elif self.stabilise == "reject" and _violates(new.sigma, delta, self.eps):
            return
        self.state = new
        self._kernel = None


@dataclass
class AmAdapter(_CovAdapter):
    state: AmState = None

    rule = "am"

    @classmethod
    def start(cls, x1, domain: Domain = None, c: Optional[float] = None, **kw) -> "AmAdapter":
        domain = Unbounded() if domain is None else domain
        mu = _free_part(x1, domain)
        c = 2.38**2 / mu.size if c is None else c
        return cls(domain=domain, state=AmState(mu, np.eye(mu.size), c), **kw)

    def update(self, data: AdaptData, j: int) -> None:
        x = _free_part(data.selected, self.domain)
        self._accept(am_update(self.state, x, j, self.step(j)))

    def summary(self) -> dict:
        return {"trace_sigma": float(np.trace(self.state.sigma)), "c": self.state.c}


@dataclass
class AswamAdapter(_CovAdapter):
    state: AswamState = None

    rule = "aswam"

    @classmethod
    def start(cls, x1, domain: Domain = None, alpha_target: float = DEFAULT_ALPHA_TARGET,
              **kw) -> "AswamAdapter":
        domain = Unbounded() if domain is None else domain
        mu = _free_part(x1, domain)
        state = AswamState(mu, np.eye(mu.size), 0.0, alpha_target)
        return cls(domain=domain, state=state, **kw)

    def update(self, data: AdaptData, j: int) -> None:
        self._accept(aswam_update(self.state, data, j, self.step(j), free=self.free))

    def summary(self) -> dict:
        return {"delta": self.state.delta, "trace_sigma": float(np.trace(self.state.sigma))}


@dataclass
class DgiAdapter(Adapter):
    """Adaptive Crank-Nicolson parameter for a Gaussian initial measure."""

    m1: GaussianInit
    state: DgiScaleState = field(default_factory=DgiScaleState)
    step: Callable[[int], float] = step_size
    _kernel: Optional[CrankNicolsonKernel] = field(default=None, init=False, repr=False)

    rule = "dgi"

    @property
    def kernel(self) -> CrankNicolsonKernel:
        if self._kernel is None:
            self._kernel = CrankNicolsonKernel.for_measure(self.m1, self.state.beta)
        return self._kernel

    def update(self, data: AdaptData, j: int) -> None:
        new = dgi_scale_update(self.state, data, j, self.step(j))
        if new.varsigma != self.state.varsigma:
            self.state = new
            self._kernel = None

    def summary(self) -> dict:
        return {"varsigma": self.state.varsigma, "beta": self.state.beta}


def _free_part(x, domain: Domain) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return x.copy() if domain.free is None else x[list(domain.free)]
