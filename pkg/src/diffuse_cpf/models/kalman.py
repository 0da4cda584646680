"""Exact smoothing for linear-Gaussian state-space models.

Used as an oracle: RTS smoothing moments and forward-filter
backward-sampling draws from the exact smoothing distribution.  A flat
(improper) prior on x_1 is handled in information form, which requires
the first observation to identify x_1 (H of full column rank).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass
class LinearGaussianSSM:
    """x_{t+1} = F x_t + N(0, Q),  y_t = H x_t + N(0, R),  x_1 ~ N(m1, P1).

    ``P1 = None`` means a flat prior on x_1.
    """

    F: np.ndarray
    Q: np.ndarray
    H: np.ndarray
    R: np.ndarray
    y: np.ndarray
    m1: Optional[np.ndarray] = None
    P1: Optional[np.ndarray] = None

    def __post_init__(self):
        self.F = np.atleast_2d(np.asarray(self.F, dtype=float))
        self.Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        self.H = np.atleast_2d(np.asarray(self.H, dtype=float))
        self.R = np.atleast_2d(np.asarray(self.R, dtype=float))
        y = np.asarray(self.y, dtype=float)
        self.y = y[:, None] if y.ndim == 1 else y
        if self.P1 is not None:
            self.P1 = np.atleast_2d(np.asarray(self.P1, dtype=float))
            self.m1 = np.zeros(self.dim) if self.m1 is None else np.atleast_1d(
                np.asarray(self.m1, dtype=float))

    @property
    def dim(self) -> int:
        return self.F.shape[0]

    @property
    def T(self) -> int:
        return self.y.shape[0]


def kalman_filter(lg: LinearGaussianSSM):
    """Filtering means/covariances and one-step predictions.

    Returns:
        ``(mf, Pf, mp, Pp)`` where ``mp[t], Pp[t]`` predict x_t from y_{1:t-1}
        (``mp[0]`` is unused when the prior is flat).
    """
    T, d = lg.T, lg.dim
    mf = np.empty((T, d))
    Pf = np.empty((T, d, d))
    mp = np.full((T, d), np.nan)
    Pp = np.full((T, d, d), np.nan)
    Rinv = np.linalg.inv(lg.R)
    for t in range(T):
        yt = lg.y[t]
        if t == 0 and lg.P1 is None:
            info = lg.H.T @ Rinv @ lg.H
            P = np.linalg.inv(info)
            mf[0] = P @ (lg.H.T @ Rinv @ yt)
            Pf[0] = P
            continue
        if t == 0:
            m, P = lg.m1, lg.P1
        else:
            m = lg.F @ mf[t - 1]
            P = lg.F @ Pf[t - 1] @ lg.F.T + lg.Q
        mp[t], Pp[t] = m, P
        S = lg.H @ P @ lg.H.T + lg.R
        K = np.linalg.solve(S, lg.H @ P).T
        mf[t] = m + K @ (yt - lg.H @ m)
        Pf[t] = P - K @ S @ K.T
        Pf[t] = 0.5 * (Pf[t] + Pf[t].T)
    return mf, Pf, mp, Pp


def kalman_smoother(lg: LinearGaussianSSM):
    """Rauch-Tung-Striebel smoother.

    Returns:
        ``(means, covs)`` of shapes (T, d) and (T, d, d).
    """
    mf, Pf, mp, Pp = kalman_filter(lg)
    T = lg.T
    ms, Ps = mf.copy(), Pf.copy()
    for t in range(T - 2, -1, -1):
        Ppred = lg.F @ Pf[t] @ lg.F.T + lg.Q
        J = np.linalg.solve(Ppred, lg.F @ Pf[t]).T
        ms[t] = mf[t] + J @ (ms[t + 1] - lg.F @ mf[t])
        Ps[t] = Pf[t] + J @ (Ps[t + 1] - Ppred) @ J.T
        Ps[t] = 0.5 * (Ps[t] + Ps[t].T)
    return ms, Ps


def ffbs_sample(lg: LinearGaussianSSM, rng, size: int) -> np.ndarray:
    """Exact joint draws from the smoothing distribution, shape (size, T, d)."""
    mf, Pf, _, _ = kalman_filter(lg)
    T, d = lg.T, lg.dim
    out = np.empty((size, T, d))
    L = np.linalg.cholesky(Pf[-1])
    out[:, -1] = mf[-1] + rng.standard_normal((size, d)) @ L.T
    for t in range(T - 2, -1, -1):
        Ppred = lg.F @ Pf[t] @ lg.F.T + lg.Q
        J = np.linalg.solve(Ppred, lg.F @ Pf[t]).T
        cov = Pf[t] - J @ Ppred @ J.T
        cov = 0.5 * (cov + cov.T)
        mean = mf[t] + (out[:, t + 1] - lg.F @ mf[t]) @ J.T
        out[:, t] = mean + rng.standard_normal((size, d)) @ np.linalg.cholesky(cov).T
    return out
