"""Grid execution: datasets, samplers, per-run chain CSVs, stats CSV and manifest."""

from __future__ import annotations

import csv
import json
import logging
import os
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.special import expit, logit
from scipy.stats import norm

from .. import __version__
from ..adapt import AmAdapter, AswamAdapter, DgiAdapter, DgiScaleState, FixedAdapter
from ..core import make_rng
from ..cpf import PathSelector
from ..diagnostics import chain_stats
from ..drivers import (
    HyperModel,
    aai_cpf_run,
    aai_pg_run,
    dpg_bs_run,
    initial_trajectory,
    thetas,
    trajectories,
)
from ..errors import ChainTooShort, ConfigError
from ..kernels import CrankNicolsonKernel, exact_m1_kernel
from ..models import (
    MvnStatic,
    MvnStaticParams,
    NoisyAR,
    NoisyArParams,
    Seir,
    SeirParams,
    StochasticVolatility,
    SvParams,
    default_seir_x1,
    piecewise_r0,
    read_dataset,
    sample_observations,
    simulate_dataset,
)
from .config import ExperimentConfig

log = logging.getLogger(__name__)

WORKERS_ENV = "DIFFUSE_CPF_WORKERS"
STATS_HEADER = ["experiment", "replicate", "variable", "n", "iact", "neff", "ire", "ci_lo", "ci_hi",
                "method", "run", "N", "alpha_target", "beta", "sigma_1", "sigma_x", "dim", "c",
                "mean", "mean_alpha", "status"]
SEIR_NAMES = ("S", "E", "I", "R", "rho")
SEIR_THETA = ("log_sigma", "logit_p")
SEIR_LOG_SIGMA_PRIOR = (-2.0, 0.3)
SEIR_LOGIT_P_PRIOR = (0.0, 10.0)


@dataclass(frozen=True)
class RunSpec:
    index: int
    replicate: int
    point: dict
    seed: int


def run_seed(base_seed: int, index: int) -> int:
    return int(np.random.SeedSequence(base_seed, spawn_key=(index,)).generate_state(1)[0])


def plan_runs(cfg: ExperimentConfig) -> list[RunSpec]:
    runs = []
    for point in cfg.grid_points():
        for rep in range(cfg.replicates):
            i = len(runs)
            runs.append(RunSpec(i, rep, point, run_seed(cfg.seed, i)))
    return runs


# ---------------------------------------------------------------------------
# Models and datasets
# ---------------------------------------------------------------------------


def model_params(cfg: ExperimentConfig, point: dict):
    p = dict(cfg.model.params)
    fam = cfg.model.family
    for k in ("sigma_1", "sigma_x", "dim"):
        if k in point:
            p[k] = point[k]
    try:
        if fam in ("noisy_ar", "rw"):
            if fam == "rw":
                p["rho"] = 1.0
            return NoisyArParams(**p)
        if fam == "sv":
            return SvParams(**p)
        if fam == "mvn":
            return MvnStaticParams(**p)
        return SeirParams(**p)
    except (TypeError, ValueError) as exc:
        raise ConfigError("model.params", str(exc)) from None


def _seir_truth_inputs(cfg, params):
    T = cfg.model.T
    knots = cfg.model.r0_knots
    r0 = piecewise_r0(T) if knots is None else piecewise_r0(T, [tuple(k) for k in knots])
    x1 = default_seir_x1(params, r0=float(r0[0])) if cfg.model.x1 is None else np.asarray(cfg.model.x1, float)
    return x1, r0


def dataset(cfg: ExperimentConfig, point: Optional[dict] = None):
    """Observations and latent truth (``None`` for user-supplied data)."""
    point = point or {}
    fam = cfg.model.family
    if fam == "mvn":
        return None, None
    if cfg.model.data_path:
        return read_dataset(cfg.model.data_path), None
    params = model_params(cfg, point)
    rng = make_rng(cfg.data_seed, "data")
    if fam == "seir":
        x1, r0 = _seir_truth_inputs(cfg, params)
        return simulate_dataset("seir", params, cfg.model.T, x1, rng, r0_path=r0)
    x1 = 0.0 if cfg.model.x1 is None else cfg.model.x1
    return simulate_dataset(fam, params, cfg.model.T, x1, rng)


def build_model(cfg: ExperimentConfig, point: dict, y):
    params = model_params(cfg, point)
    fam = cfg.model.family
    if fam in ("noisy_ar", "rw"):
        return NoisyAR(params, y)
    if fam == "sv":
        return StochasticVolatility(params, y)
    if fam == "mvn":
        return MvnStatic(params)
    return Seir(params, y)


def seir_hyper(base: Seir) -> HyperModel:
    """Hyperparameters (log sigma, logit p) with independent normal priors."""
    (ms, ss), (mp, sp) = SEIR_LOG_SIGMA_PRIOR, SEIR_LOGIT_P_PRIOR

    def log_prior(theta):
        return float(norm.logpdf(theta[0], ms, ss) + norm.logpdf(theta[1], mp, sp))

    def factory(theta):
        return base.with_params(sigma=float(np.exp(theta[0])), p=float(expit(theta[1])))

    return HyperModel(log_prior=log_prior, factory=factory, names=SEIR_THETA)


def _initial_state(cfg, model, y, rng):
    fam = cfg.model.family
    if fam == "mvn":
        return np.zeros((1, model.dim))
    if fam == "seir":
        x1, _ = _seir_truth_inputs(cfg, model.params)
        return initial_trajectory(model, x1, rng)
    x1 = float(y[0]) if cfg.model.x1 is None else float(cfg.model.x1)
    return initial_trajectory(model, np.array([x1]), rng)


def build_adapter(cfg: ExperimentConfig, point: dict, model, x0):
    method = cfg.method
    a = cfg.adapt
    alpha_target = point.get("alpha_target", a.get("alpha_target", 0.8))
    stab = dict(stabilise=a.get("stabilise", "off"), eps=float(a.get("eps", 1e-6)))
    if method == "cpf-bs":
        return FixedAdapter(exact_m1_kernel(model.m1))
    if method == "dgi":
        if "beta" in point:
            return FixedAdapter(CrankNicolsonKernel.for_measure(model.m1, point["beta"]))
        return DgiAdapter(model.m1, DgiScaleState(float(a.get("varsigma0", 0.0)), alpha_target))
    domain = model.m1.domain
    if method == "fdi-am":
        c = point.get("c", a.get("c"))
        return AmAdapter.start(x0[0], domain, c=c, **stab)
    return AswamAdapter.start(x0[0], domain, alpha_target=alpha_target, **stab)


# ---------------------------------------------------------------------------
# Single run
# ---------------------------------------------------------------------------


def variables(cfg: ExperimentConfig, traj: np.ndarray, theta: Optional[np.ndarray]) -> dict:
    """Scalar summaries whose chains are diagnosed."""
    fam = cfg.model.family
    out = {}
    if fam == "seir":
        for c in (1, 2, 4):
            out[f"{SEIR_NAMES[c]}1"] = traj[:, 0, c]
        if theta is not None:
            for k, name in enumerate(SEIR_THETA):
                out[name] = theta[:, k]
        return out
    d = traj.shape[2]
    for c in range(d):
        sfx = "" if d == 1 else f"_{c + 1}"
        out[f"x1{sfx}"] = traj[:, 0, c]
        if traj.shape[1] > 1:
            out[f"xT{sfx}"] = traj[:, -1, c]
    return out


def state_columns(cfg: ExperimentConfig, T: int, d: int) -> list[str]:
    if cfg.model.family == "seir":
        return [f"{n}{t}" for t in range(1, T + 1) for n in SEIR_NAMES]
    if d == 1:
        return [f"x{t}" for t in range(1, T + 1)]
    return [f"x{t}_{c}" for t in range(1, T + 1) for c in range(1, d + 1)]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_chain(path: Path, cfg: ExperimentConfig, records) -> None:
    traj = trajectories(records)
    n, T, d = traj.shape if records else (0, cfg.model.T, 1)
    theta = thetas(records) if records and records[0].theta is not None else None
    header = ["iteration", "alpha"]
    if theta is not None:
        header += list(SEIR_THETA) + ["theta_accepted", "theta_alpha"]
    adapt_keys = sorted(records[0].adapt) if records else []
    header += adapt_keys + state_columns(cfg, T, d)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for k, r in enumerate(records):
            row = [r.iteration, _fmt(r.alpha)]
            if theta is not None:
                row += [_fmt(v) for v in theta[k]] + [_fmt(r.theta_accepted), _fmt(r.theta_alpha)]
            row += [_fmt(r.adapt[a]) for a in adapt_keys]
            row += [_fmt(v) for v in traj[k].ravel()]
            w.writerow(row)


def read_chain(path) -> dict:
    """Read a chain CSV into a dict of column arrays."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    cols = {}
    for j, name in enumerate(header):
        cols[name] = np.array([float(r[j]) if r[j] != "" else np.nan for r in body])
    return cols


def _stats_rows(cfg, spec, variables_, N, mean_alpha, status="ok"):
    p = spec.point
    rows = []
    for name, chain in variables_.items():
        base = {"experiment": cfg.experiment, "replicate": spec.replicate, "variable": name,
                "method": cfg.method, "run": spec.index, "N": p.get("N"),
                "alpha_target": p.get("alpha_target"), "beta": p.get("beta"),
                "sigma_1": p.get("sigma_1"), "sigma_x": p.get("sigma_x"), "dim": p.get("dim"),
                "c": p.get("c"), "mean_alpha": mean_alpha, "status": status}
        if chain is None:
            base.update(n=0, iact=np.nan, neff=np.nan, ire=np.nan, ci_lo=np.nan, ci_hi=np.nan,
                        mean=np.nan)
        else:
            try:
                st = chain_stats(chain, N)
                base.update(n=st.n, iact=st.iact, neff=st.neff, ire=st.ire, ci_lo=st.ci_lo,
                            ci_hi=st.ci_hi, mean=st.mean)
            except ChainTooShort:
                base.update(n=len(chain), iact=np.nan, neff=np.nan, ire=np.nan, ci_lo=np.nan,
                            ci_hi=np.nan, mean=float(np.mean(chain)), status="too-short")
        rows.append(base)
    return rows


def expected_variables(cfg: ExperimentConfig, point: dict) -> list[str]:
    fam = cfg.model.family
    T = cfg.model.T
    d = point.get("dim", cfg.model.params.get("dim", 1)) if fam == "mvn" else (5 if fam == "seir" else 1)
    theta = np.zeros((1, 2)) if cfg.method == "fdi-pg" else None
    return list(variables(cfg, np.zeros((1, T, d)), theta))


def sample_chain(cfg: ExperimentConfig, spec: RunSpec):
    """Run one chain; returns (records, model)."""
    y, _ = dataset(cfg, spec.point)
    model = build_model(cfg, spec.point, y)
    rng = make_rng(spec.seed)
    x0 = _initial_state(cfg, model, y, rng)
    N = spec.point["N"]
    sched = dict(burn_in=cfg.burn_in, thin=cfg.thin)
    if cfg.method == "dpg-bs":
        return dpg_bs_run(x0[0], x0[1:], model, N, cfg.n_iters, rng, **sched), model
    adapter = build_adapter(cfg, spec.point, model, x0)
    selector = PathSelector(cfg.selector)
    if cfg.method == "fdi-pg":
        hyper = seir_hyper(model)
        theta0 = np.array(cfg.theta0 if cfg.theta0 is not None
                          else [SEIR_LOG_SIGMA_PRIOR[0], float(logit(model.params.p))])
        return aai_pg_run(theta0, x0, hyper, adapter, N, cfg.n_iters, rng, selector=selector,
                          **sched), model
    return aai_cpf_run(x0, adapter, model, N, cfg.n_iters, rng, selector=selector, **sched), model


def execute_run(cfg: ExperimentConfig, spec: RunSpec, out_dir: str) -> dict:
    """Run one grid point/replicate, write its chain CSV and return its stats rows."""
    chain_file = Path(out_dir) / "chains" / f"run{spec.index:04d}.csv"
    t0 = time.perf_counter()
    try:
        records, _ = sample_chain(cfg, spec)
        write_chain(chain_file, cfg, records)
        traj = trajectories(records)
        th = thetas(records) if records and records[0].theta is not None else None
        mean_alpha = float(np.mean([r.alpha for r in records])) if records else np.nan
        rows = _stats_rows(cfg, spec, variables(cfg, traj, th), spec.point["N"], mean_alpha)
        status, error = "ok", None
    except Exception as exc:  # recorded per run; the grid goes on
        log.error("run %d (seed %d) failed: %s", spec.index, spec.seed, exc)
        names = expected_variables(cfg, spec.point)
        rows = _stats_rows(cfg, spec, {n: None for n in names}, spec.point["N"], np.nan, "error")
        status, error = "error", "".join(traceback.format_exception_only(type(exc), exc)).strip()
    return {"index": spec.index, "replicate": spec.replicate, "point": spec.point,
            "seed": spec.seed, "status": status, "error": error,
            "chain": str(chain_file.relative_to(out_dir)) if status == "ok" else None,
            "seconds": round(time.perf_counter() - t0, 3), "rows": rows}


def _execute(args):
    return execute_run(*args)


def worker_count(flag: Optional[int]) -> int:
    """``--workers`` wins, then the environment variable, then 1."""
    if flag is not None:
        n = flag
    else:
        env = os.environ.get(WORKERS_ENV)
        try:
            n = int(env) if env else 1
        except ValueError:
            raise ConfigError(WORKERS_ENV, f"must be an integer, got {env!r}") from None
    if n < 1:
        raise ConfigError("workers", f"must be >= 1, got {n}")
    return n


def write_stats(path: Path, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(STATS_HEADER)
        for r in rows:
            w.writerow([r[k] if isinstance(r[k], str) else _fmt(r[k]) for k in STATS_HEADER])


def read_stats(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def run_experiment(cfg: ExperimentConfig, workers: int = 1, out: Optional[str] = None) -> int:
    """Run every grid point and replicate.

    Writes ``chains/runNNNN.csv``, ``stats.csv`` and ``manifest.json``
    below the output directory.

    Returns:
        0 when every run succeeded, 2 when at least one run failed.
    """
    out_dir = Path(out or cfg.out)
    cfg = replace(cfg, out=str(out_dir))
    (out_dir / "chains").mkdir(parents=True, exist_ok=True)
    specs = plan_runs(cfg)
    tasks = [(cfg, s, str(out_dir)) for s in specs]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_execute, tasks))
    else:
        results = [_execute(t) for t in tasks]
    results.sort(key=lambda r: r["index"])
    write_stats(out_dir / "stats.csv", [row for r in results for row in r["rows"]])
    manifest = {
        "version": __version__,
        "config": cfg.to_dict(),
        "workers": workers,
        "runs": [{k: v for k, v in r.items() if k != "rows"} for r in results],
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_json))
    failed = [r for r in results if r["status"] != "ok"]
    for r in failed:
        log.error("run %d failed (seed %d): %s", r["index"], r["seed"], r["error"])
    return 2 if failed else 0


def _json(o):
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(type(o).__name__)


def restats(out_dir) -> int:
    """Recompute ``stats.csv`` from the chain CSVs listed in a run manifest."""
    from .config import from_dict

    out_dir = Path(out_dir)
    try:
        manifest = json.loads((out_dir / "manifest.json").read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError("out", f"no readable manifest in {out_dir}: {exc}") from None
    cfg = from_dict(manifest["config"])
    rows = []
    for run in manifest["runs"]:
        spec = RunSpec(run["index"], run["replicate"], run["point"], run["seed"])
        if run["status"] != "ok":
            names = expected_variables(cfg, spec.point)
            rows += _stats_rows(cfg, spec, {n: None for n in names}, spec.point["N"], np.nan, "error")
            continue
        cols = read_chain(out_dir / run["chain"])
        traj, th = chain_arrays(cfg, cols)
        rows += _stats_rows(cfg, spec, variables(cfg, traj, th), spec.point["N"],
                            float(np.mean(cols["alpha"])) if cols["alpha"].size else np.nan)
    write_stats(out_dir / "stats.csv", rows)
    return 0


def chain_arrays(cfg: ExperimentConfig, cols: dict):
    """Rebuild (trajectories, thetas) from chain CSV columns."""
    n = cols["iteration"].size
    T = cfg.model.T
    if cfg.model.family == "seir":
        d = 5
    elif cfg.model.family == "mvn":
        d = sum(1 for k in cols if k.startswith("x1_")) or 1
    else:
        d = 1
    names = state_columns(cfg, T, d)
    traj = np.column_stack([cols[c] for c in names]).reshape(n, T, d) if n else np.empty((0, T, d))
    th = np.column_stack([cols[c] for c in SEIR_THETA]) if SEIR_THETA[0] in cols else None
    return traj, th


def posterior_predictive(traj, theta, params: SeirParams, rng) -> np.ndarray:
    """Re-simulate counts for each retained draw given its infected path.

    Args:
        traj: (n, T, 5) SEIR trajectories.
        theta: (n, 2) transformed hyperparameters or ``None`` (use ``params.p``).
        params: model constants.
        rng: numpy Generator.

    Returns:
        (n, T) simulated counts.
    """
    traj = np.asarray(traj, dtype=float)
    out = np.empty(traj.shape[:2])
    for k in range(traj.shape[0]):
        p = params if theta is None else replace(params, p=float(expit(theta[k][1])))
        out[k] = sample_observations(p, traj[k, :, 2], rng)
    return out


def predictive(out_dir, seed: int = 0) -> int:
    """Write ``predictive.csv`` (quantiles of simulated counts per day) for SEIR runs."""
    from .config import from_dict

    out_dir = Path(out_dir)
    try:
        manifest = json.loads((out_dir / "manifest.json").read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError("out", f"no readable manifest in {out_dir}: {exc}") from None
    cfg = from_dict(manifest["config"])
    if cfg.model.family != "seir":
        raise ConfigError("model.family", "posterior predictive is only defined for SEIR runs")
    y, _ = dataset(cfg)
    with (out_dir / "predictive.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["run", "date", "observed", "q025", "q50", "q975", "mean"])
        for run in manifest["runs"]:
            if run["status"] != "ok":
                continue
            traj, th = chain_arrays(cfg, read_chain(out_dir / run["chain"]))
            params = model_params(cfg, run["point"])
            sims = posterior_predictive(traj, th, params, make_rng(seed, "predictive", run["index"]))
            if sims.size == 0:
                continue
            q = np.quantile(sims, [0.025, 0.5, 0.975], axis=0)
            for t in range(sims.shape[1]):
                w.writerow([run["index"], t + 1, _fmt(y[t]), _fmt(q[0, t]), _fmt(q[1, t]),
                            _fmt(q[2, t]), _fmt(sims[:, t].mean())])
    return 0
