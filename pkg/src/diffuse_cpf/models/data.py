"""Dataset simulation and CSV input/output."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .mvn import MvnStaticParams
from .scalar import NoisyArParams, SvParams, simulate_noisy_ar, simulate_sv
from .seir import SeirParams, simulate_seir

FAMILIES = ("noisy_ar", "rw", "sv", "seir")


def piecewise_r0(T: int, knots=((0, 2.5), (30, 0.8), (70, 1.3), (100, 0.9))) -> np.ndarray:
    """Piecewise-constant R0 path; ``knots`` are (start day, value) pairs."""
    r0 = np.empty(T)
    for start, value in knots:
        r0[start:] = value
    return r0


def default_seir_x1(params: SeirParams, exposed: int = 400, infected: int = 200, r0: float = 2.5):
    rho = np.log(r0 / (params.r0_max - r0))
    return np.array([params.popsize - exposed - infected, exposed, infected, 0.0, rho])


def simulate_dataset(family: str, params, T: int, x1, rng, r0_path=None):
    """Simulate observations and the latent truth.

    Args:
        family: one of ``noisy_ar``, ``rw``, ``sv``, ``seir``.
        params: the family's parameter dataclass.
        T: series length.
        x1: initial state (scalar for the 1-d models, a 5-vector for SEIR).
        rng: numpy Generator.
        r0_path: SEIR only, an optional prescribed R0 per day.

    Returns:
        ``(y, x)`` with ``y`` of shape (T,) and ``x`` of shape (T, d).
    """
    if T < 1:
        raise ValueError("T must be positive")
    if family in ("noisy_ar", "rw"):
        if family == "rw" and params.rho != 1.0:
            raise ValueError("the RW family needs rho = 1")
        return simulate_noisy_ar(params, T, float(np.ravel(x1)[0]), rng)
    if family == "sv":
        return simulate_sv(params, T, float(np.ravel(x1)[0]), rng)
    if family == "seir":
        return simulate_seir(params, T, np.asarray(x1, dtype=float), rng, r0_path=r0_path)
    raise ValueError(f"unknown model family {family!r}; expected one of {FAMILIES}")


def params_for(family: str, values: dict):
    if family in ("noisy_ar", "rw"):
        return NoisyArParams(**values)
    if family == "sv":
        return SvParams(**values)
    if family == "seir":
        return SeirParams(**values)
    if family == "mvn":
        return MvnStaticParams(**values)
    raise ValueError(f"unknown model family {family!r}")


def write_dataset(path, y, seir: bool = False) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["date", "count"] if seir else ["t", "y"])
        for t, v in enumerate(np.asarray(y).ravel(), start=1):
            w.writerow([t, int(v) if seir else repr(float(v))])


def read_dataset(path) -> np.ndarray:
    """Read a ``t,y`` or ``date,count`` CSV; the second column is returned."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [h.strip() for h in rows[0]] not in (["t", "y"], ["date", "count"]):
        raise ValueError(f"{path}: expected header 't,y' or 'date,count'")
    return np.array([float(r[1]) for r in rows[1:] if r])


def write_truth(path, x) -> None:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[0] == 1 and x.shape[1] > 1:
        x = x.T
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"x{i + 1}" for i in range(x.shape[1])])
        for t, row in enumerate(x, start=1):
            w.writerow([t] + [repr(float(v)) for v in row])


def read_truth(path) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 1:]
