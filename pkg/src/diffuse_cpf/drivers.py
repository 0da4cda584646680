"""Iterated samplers built on the AI-CPF step.

* :func:`aai_cpf_run` iterates AI-CPF updates with an adapter.
* :func:`aai_pg_run` adds a RAM-adapted Metropolis block for hyperparameters.
* :func:`dpg_bs_run` is the baseline that treats x_1 as a parameter: CPF-BS
  on x_{2:T} followed by a RAM Metropolis update of x_1.

All drivers return a list of :class:`ChainRecord` after burn-in and thinning.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .adapt import Adapter, RamState, ram_update
from .core import Domain, FeynmanKacModel, simulate_prior_trajectory
from .cpf import PathSelector, ai_cpf_step, forward_cpf, path_from_indices, pick_path_bs
from .errors import DiffuseCPFError, NonFiniteTarget
from .models.seir import initial_domain

__all__ = [
    "ChainRecord",
    "HyperModel",
    "keep_iteration",
    "n_records",
    "initial_trajectory",
    "aai_cpf_run",
    "aai_pg_run",
    "dpg_bs_run",
    "propose_initial",
    "seir_initial_block_proposal",
    "trajectories",
    "thetas",
]


@dataclass
class ChainRecord:
    """One retained iteration of a chain.

    Attributes:
        iteration: 1-based iteration index.
        trajectory: (T, d) state of the chain.
        theta: hyperparameters (transformed coordinates) or ``None``.
        alpha: realised acceptance rate of the trajectory update (1 - V_1[0]
            for AI-CPF steps, the Metropolis probability for DPG-BS).
        theta_accepted: whether the hyperparameter block moved.
        adapt: snapshot summary of the adaptation state.
    """

    iteration: int
    trajectory: np.ndarray
    theta: Optional[np.ndarray] = None
    alpha: float = float("nan")
    theta_accepted: Optional[bool] = None
    theta_alpha: float = float("nan")
    adapt: dict = field(default_factory=dict)


@dataclass
class HyperModel:
    """Hyperparameter prior plus a factory of conditional Feynman-Kac models.

    ``theta`` lives in unconstrained (transformed) coordinates and
    ``log_prior`` is the prior density in those coordinates, so no
    Jacobian term is needed.
    """

    log_prior: Callable[[np.ndarray], float]
    factory: Callable[[np.ndarray], FeynmanKacModel]
    names: tuple = ()

    def log_target(self, theta, traj) -> float:
        lp = float(self.log_prior(theta))
        if lp == -np.inf:
            return lp
        val = lp + float(self.factory(theta).log_density(traj))
        if np.isnan(val):
            raise NonFiniteTarget(f"log target is NaN at theta={np.asarray(theta).tolist()}")
        return val


def keep_iteration(j: int, burn_in: int, thin: int) -> bool:
    return j > burn_in and (j - burn_in) % thin == 0


def n_records(n_iters: int, burn_in: int, thin: int) -> int:
    return max(n_iters - burn_in, 0) // thin


def _check_schedule(n_iters, burn_in, thin):
    if n_iters < 0 or burn_in < 0 or thin < 1:
        raise ValueError("need n_iters >= 0, burn_in >= 0 and thin >= 1")


def initial_trajectory(model: FeynmanKacModel, x1, rng, max_tries: int = 100) -> np.ndarray:
    """Simulate x_{2:T} from the dynamics at ``x1`` until the posterior weight is positive.

    Raises:
        DiffuseCPFError: after ``max_tries`` trajectories with zero weight.
    """
    for _ in range(max_tries):
        traj = simulate_prior_trajectory(model, x1, rng)
        if np.isfinite(model.log_density(traj)):
            return traj
    raise DiffuseCPFError(f"no trajectory with positive weight in {max_tries} tries")


def aai_cpf_run(x0, adapter: Adapter, model: FeynmanKacModel, N: int, n_iters: int, rng,
                selector=PathSelector.BACKWARD_SAMPLING, burn_in: int = 0, thin: int = 1,
                adapt: bool = True) -> list[ChainRecord]:
    """Adaptive AI-CPF chain.

    Args:
        x0: (T, d) initial reference trajectory with positive weight.
        adapter: kernel family and adaptation rule.
        model: Feynman-Kac model.
        N: number of particles.
        n_iters: number of iterations.
        rng: numpy Generator.
        selector: path selector.
        burn_in: iterations discarded from the output.
        thin: keep every ``thin``-th iteration after burn-in.
        adapt: ``False`` freezes the adapter (time-homogeneous chain).
    """
    _check_schedule(n_iters, burn_in, thin)
    x = np.asarray(x0, dtype=float)
    out = []
    for j in range(1, n_iters + 1):
        x, data = ai_cpf_step(x, adapter.kernel, model, N, rng, selector)
        if adapt:
            adapter.update(data, j)
        if keep_iteration(j, burn_in, thin):
            out.append(ChainRecord(j, x, alpha=data.alpha, adapt=adapter.summary()))
    return out


def _mh_theta(theta, lt_cur, hyper, traj, ram: RamState, rng):
    U = rng.standard_normal(theta.size)
    prop = theta + ram.S @ U
    lt_prop = hyper.log_target(prop, traj)
    alpha = 0.0 if lt_prop == -np.inf else float(min(1.0, np.exp(min(0.0, lt_prop - lt_cur))))
    if rng.random() < alpha:
        return prop, alpha, True, U
    return theta, alpha, False, U


def aai_pg_run(theta0, x0, hyper: HyperModel, adapter: Adapter, N: int, n_iters: int, rng,
               ram: Optional[RamState] = None, selector=PathSelector.BACKWARD_SAMPLING,
               burn_in: int = 0, thin: int = 1, adapt: bool = True) -> list[ChainRecord]:
    """Adaptive particle Gibbs: RAM Metropolis on theta, then an AI-CPF update.

    The theta block targets ``log_prior(theta) + log gamma_theta(x)`` given
    the current trajectory; the trajectory update runs under the new theta.
    """
    _check_schedule(n_iters, burn_in, thin)
    theta = np.atleast_1d(np.asarray(theta0, dtype=float)).copy()
    x = np.asarray(x0, dtype=float)
    ram = RamState.identity(theta.size) if ram is None else ram
    out = []
    for j in range(1, n_iters + 1):
        lt_cur = hyper.log_target(theta, x)
        if lt_cur == -np.inf:
            raise NonFiniteTarget("current state has zero posterior density")
        theta, a_theta, acc, U = _mh_theta(theta, lt_cur, hyper, x, ram, rng)
        if adapt:
            ram = ram_update(ram, U, a_theta, j)
        model = hyper.factory(theta)
        x, data = ai_cpf_step(x, adapter.kernel, model, N, rng, selector)
        if adapt:
            adapter.update(data, j)
        if keep_iteration(j, burn_in, thin):
            summary = adapter.summary()
            summary["ram_trace"] = float(np.sum(ram.S**2))
            out.append(ChainRecord(j, x, theta=theta.copy(), alpha=data.alpha,
                                   theta_accepted=acc, theta_alpha=a_theta, adapt=summary))
    return out


def propose_initial(x1, S, domain: Domain, U) -> np.ndarray:
    """Gaussian step ``S U`` in the domain's free coordinates, then completion."""
    y = np.array(x1, dtype=float)
    step = np.asarray(S) @ np.asarray(U, dtype=float)
    if domain.free is None:
        y = y + step
    else:
        y[list(domain.free)] += step
    return domain.complete(y)


def seir_initial_block_proposal(current, S, rng, popsize: int, U=None) -> np.ndarray:
    """Random-walk proposal for (E1, I1, rho1) with rounding and S1 from conservation.

    Args:
        current: current initial state (S, E, I, R, rho).
        S: 3x3 proposal factor (e.g. a RAM factor) over (E, I, rho).
        rng: numpy Generator (unused when ``U`` is given).
        popsize: population size.
        U: optional standard normal 3-vector.

    Returns:
        The candidate full state; check it with the domain indicator.
    """
    U = rng.standard_normal(3) if U is None else U
    return propose_initial(current, S, initial_domain(popsize), U)


def _dpg_log_target(model: FeynmanKacModel, x1, x2) -> float:
    x1 = np.asarray(x1, dtype=float)
    lp = float(model.m1.log_density(x1))
    if lp == -np.inf:
        return lp
    lp += float(model.log_potential(0, None, x1[None])[0])
    if model.T > 1:
        lp += float(model.log_transition(1, x1[None], x2[None])[0])
        lp += float(model.log_potential(1, x1[None], x2[None])[0])
    return lp


def dpg_bs_run(x1, x_rest, model: FeynmanKacModel, N: int, n_iters: int, rng,
               ram: Optional[RamState] = None, burn_in: int = 0, thin: int = 1,
               adapt: bool = True) -> list[ChainRecord]:
    """Particle Gibbs treating x_1 as a parameter.

    Each iteration runs CPF-BS on x_{2:T} given x_1 (slot 0 pinned to the
    current x_{2:T}), then one RAM Metropolis update of x_1 targeting
    M1(x1) G1(x1) M2(x2 | x1) G2(x1, x2).
    """
    _check_schedule(n_iters, burn_in, thin)
    if model.T < 2:
        raise ValueError("DPG-BS needs T >= 2")
    domain = model.m1.domain
    x1 = np.asarray(x1, dtype=float).copy()
    traj = np.vstack([x1[None], np.asarray(x_rest, dtype=float)])
    k = model.dim if domain.free is None else len(domain.free)
    ram = RamState.identity(k) if ram is None else ram
    out = []
    for j in range(1, n_iters + 1):
        first = np.empty((N, model.dim))
        first[0] = traj[1]
        if N > 1:
            first[1:] = model.sample_transition(1, np.broadcast_to(x1, (N - 1, model.dim)), rng)
        ps = forward_cpf(traj, first, model, rng, start=1, x_fixed=x1)
        B, _ = pick_path_bs(ps, model, rng)
        traj = np.vstack([x1[None], path_from_indices(ps, B)])

        U = rng.standard_normal(k)
        prop = propose_initial(x1, ram.S, domain, U)
        lt_cur = _dpg_log_target(model, x1, traj[1])
        lt_prop = _dpg_log_target(model, prop, traj[1])
        alpha = 0.0 if lt_prop == -np.inf else float(min(1.0, np.exp(min(0.0, lt_prop - lt_cur))))
        if rng.random() < alpha:
            x1 = prop
            traj = traj.copy()
            traj[0] = x1
        if adapt:
            ram = ram_update(ram, U, alpha, j)
        if keep_iteration(j, burn_in, thin):
            out.append(ChainRecord(j, traj, alpha=alpha, adapt={"ram_trace": float(np.sum(ram.S**2))}))
    return out


def trajectories(records) -> np.ndarray:
    """Stack record trajectories into an array of shape (n, T, d)."""
    return np.stack([r.trajectory for r in records]) if records else np.empty((0, 0, 0))


def thetas(records) -> np.ndarray:
    return np.stack([r.theta for r in records]) if records else np.empty((0, 0))
