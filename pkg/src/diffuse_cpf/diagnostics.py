"""Chain diagnostics: autocorrelation, IACT, effective sample size, IRE and mean intervals.

The IACT estimator is Geyer's initial positive sequence: autocorrelations
are summed in consecutive pairs until a pair sum is non-positive.
Constant chains, and chains whose pair sums stay positive up to lag n/2,
are reported as divergent (``inf``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .errors import ChainTooShort

__all__ = ["MIN_LENGTH", "acf", "iact", "neff", "ire", "mean_ci", "ChainStats", "chain_stats"]

MIN_LENGTH = 100


def _autocov(x) -> np.ndarray:
    """Biased autocovariances at all lags via FFT."""
    x = np.asarray(x, dtype=float)
    n = x.size
    z = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(z, size)
    return np.fft.irfft(f * np.conj(f), size)[:n] / n


def acf(chain, max_lag: int = 50) -> np.ndarray:
    """Autocorrelations at lags 0..max_lag (lag 0 is exactly 1).

    A constant chain has undefined autocorrelations and yields NaN beyond lag 0.
    """
    c = _autocov(chain)
    max_lag = min(max_lag, c.size - 1)
    out = np.full(max_lag + 1, np.nan)
    out[0] = 1.0
    if c[0] > 0:
        out[1:] = c[1:max_lag + 1] / c[0]
    return out


def iact(chain) -> float:
    """Integrated autocorrelation time 1 + 2 sum_k rho_k (Geyer truncation).

    Raises:
        ChainTooShort: for fewer than ``MIN_LENGTH`` samples.
    """
    x = np.asarray(chain, dtype=float).ravel()
    n = x.size
    if n < MIN_LENGTH:
        raise ChainTooShort(f"need at least {MIN_LENGTH} samples, got {n}")
    if np.ptp(x) == 0:
        return float("inf")
    c = _autocov(x)
    rho = c / c[0]
    n_pairs = n // 4  # pairs (2m, 2m+1) with 2m + 1 <= n / 2
    pairs = rho[0:2 * n_pairs:2] + rho[1:2 * n_pairs:2]
    neg = np.nonzero(pairs <= 0)[0]
    if neg.size == 0:
        return float("inf")
    m = neg[0]
    return float(-1.0 + 2.0 * pairs[:m].sum())


def neff(chain) -> float:
    """Effective sample size n / IACT."""
    x = np.asarray(chain).ravel()
    return x.size / iact(x)


def ire(iact_value: float, N: int) -> float:
    """Inverse relative efficiency: IACT scaled by the number of particles."""
    return iact_value * N


def mean_ci(chain, level: float = 0.95, tau=None):
    """Mean +- z sd sqrt(IACT / n).

    A constant chain returns a zero-width interval at its value.
    """
    x = np.asarray(chain, dtype=float).ravel()
    m = float(x.mean())
    sd = float(x.std())
    if sd == 0.0:
        return m, m
    tau = iact(x) if tau is None else tau
    half = norm.ppf(0.5 + level / 2.0) * sd * np.sqrt(tau / x.size)
    return m - half, m + half


@dataclass
class ChainStats:
    n: int
    mean: float
    iact: float
    neff: float
    ire: float
    ci_lo: float
    ci_hi: float
    acf: np.ndarray

    @property
    def divergent(self) -> bool:
        return not np.isfinite(self.iact)

    @property
    def degenerate_ci(self) -> bool:
        return self.ci_lo == self.ci_hi


def chain_stats(chain, N: int, max_lag: int = 50, level: float = 0.95) -> ChainStats:
    x = np.asarray(chain, dtype=float).ravel()
    tau = iact(x)
    lo, hi = mean_ci(x, level, tau=tau)
    return ChainStats(n=x.size, mean=float(x.mean()), iact=tau, neff=x.size / tau,
                      ire=ire(tau, N), ci_lo=lo, ci_hi=hi, acf=acf(x, max_lag))
