"""Experiment configuration: YAML files with include-able presets.

A config is a mapping; ``preset: <name or path>`` pulls in a bundled
preset (``presets/<name>.yaml``) or another file, and the remaining keys
override it recursively.  See ``presets/`` for the schema in use.
"""

from __future__ import annotations

import copy
import itertools
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from ..errors import ConfigError

PRESET_DIR = Path(__file__).parent / "presets"

EXPERIMENTS = ("fig1", "dgi-grid", "fdi-grid", "mvn-grid", "seir")
METHODS = ("cpf-bs", "dgi", "fdi-am", "fdi-aswam", "dpg-bs", "fdi-pg")
FAMILIES = ("noisy_ar", "rw", "sv", "mvn", "seir")
#: grid keys that change the auxiliary kernel or the model
GRID_KEYS = ("N", "alpha_target", "beta", "sigma_1", "sigma_x", "dim", "c")
_METHOD_FAMILIES = {
    "cpf-bs": ("noisy_ar", "rw", "sv"),
    "dgi": ("noisy_ar", "rw", "sv"),
    "fdi-am": ("noisy_ar", "rw", "sv", "mvn", "seir"),
    "fdi-aswam": ("noisy_ar", "rw", "sv", "mvn", "seir"),
    "dpg-bs": ("noisy_ar", "rw", "sv", "seir"),
    "fdi-pg": ("seir",),
}


@dataclass
class ModelConfig:
    family: str
    params: dict = field(default_factory=dict)
    T: int = 50
    x1: Optional[list] = None
    data_path: Optional[str] = None
    r0_knots: Optional[list] = None


@dataclass
class ExperimentConfig:
    """Validated experiment description.

    ``grid`` maps keys of :data:`GRID_KEYS` to nonempty lists; every
    combination is run ``replicates`` times with independent chain seeds
    on a single dataset simulated from ``data_seed``.
    """

    experiment: str
    method: str
    model: ModelConfig
    grid: dict
    n_iters: int
    burn_in: int = 0
    thin: int = 1
    replicates: int = 1
    seed: int = 0
    data_seed: int = 0
    selector: str = "bs"
    adapt: dict = field(default_factory=dict)
    theta0: Optional[list] = None
    out: str = "results"

    def grid_points(self) -> list[dict]:
        keys = [k for k in GRID_KEYS if k in self.grid]
        return [dict(zip(keys, vals)) for vals in itertools.product(*(self.grid[k] for k in keys))]

    def to_dict(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _load_yaml(path: Path) -> dict:
    try:
        data = yaml.safe_load(path.read_text())
    except FileNotFoundError:
        raise ConfigError("preset", f"file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError("config", f"invalid YAML in {path}: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("config", f"{path} must contain a mapping")
    return data


def _preset_path(name: str, base_dir: Path) -> Path:
    p = Path(name)
    if p.suffix in (".yaml", ".yml"):
        return p if p.is_absolute() else base_dir / p
    return PRESET_DIR / f"{name}.yaml"


def resolve(raw: dict, base_dir: Path = Path("."), _depth: int = 0) -> dict:
    """Expand ``preset`` includes recursively."""
    if _depth > 10:
        raise ConfigError("preset", "include chain too deep (cycle?)")
    raw = dict(raw)
    name = raw.pop("preset", None)
    if name is None:
        return raw
    path = _preset_path(str(name), base_dir)
    base = resolve(_load_yaml(path), path.parent, _depth + 1)
    return _merge(base, raw)


def load_config(path, overrides: Optional[dict] = None) -> ExperimentConfig:
    """Load a YAML config, a preset name, or a run manifest (JSON)."""
    path = Path(path)
    if not path.exists() and not path.suffix:
        raw = {"preset": str(path)}
        base_dir = Path(".")
    elif path.suffix == ".json":
        try:
            raw = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError("config", f"cannot read {path}: {exc}") from None
        raw = raw.get("config", raw)
        base_dir = path.parent
    else:
        raw = _load_yaml(path)
        base_dir = path.parent
    merged = resolve(raw, base_dir)
    if overrides:
        merged = _merge(merged, {k: v for k, v in overrides.items() if v is not None})
    return from_dict(merged)


def _int(d: dict, key: str, default=None, minimum=None) -> int:
    v = d.get(key, default)
    if v is None:
        raise ConfigError(key, "is required")
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(key, f"must be an integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise ConfigError(key, f"must be >= {minimum}, got {v}")
    return v


def from_dict(d: dict) -> ExperimentConfig:
    """Validate a resolved mapping; errors name the offending field."""
    if not isinstance(d, dict):
        raise ConfigError("config", "must be a mapping")
    known = {f for f in ExperimentConfig.__dataclass_fields__}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown configuration key")
    exp = d.get("experiment")
    if exp not in EXPERIMENTS:
        raise ConfigError("experiment", f"must be one of {EXPERIMENTS}, got {exp!r}")
    method = d.get("method")
    if method not in METHODS:
        raise ConfigError("method", f"must be one of {METHODS}, got {method!r}")

    m = d.get("model")
    if not isinstance(m, dict):
        raise ConfigError("model", "must be a mapping")
    unknown = set(m) - set(ModelConfig.__dataclass_fields__)
    if unknown:
        raise ConfigError(f"model.{sorted(unknown)[0]}", "unknown model key")
    family = m.get("family")
    if family not in FAMILIES:
        raise ConfigError("model.family", f"must be one of {FAMILIES}, got {family!r}")
    if family not in _METHOD_FAMILIES[method]:
        raise ConfigError("method", f"{method!r} does not apply to the {family!r} model")
    if not isinstance(m.get("params", {}), dict):
        raise ConfigError("model.params", "must be a mapping")
    T = m.get("T", 1 if family == "mvn" else 50)
    if isinstance(T, bool) or not isinstance(T, int) or T < 1:
        raise ConfigError("model.T", f"must be a positive integer, got {T!r}")
    if method == "dpg-bs" and T < 2:
        raise ConfigError("model.T", "DPG-BS needs T >= 2")
    model = ModelConfig(family=family, params=dict(m.get("params") or {}), T=T, x1=m.get("x1"),
                        data_path=m.get("data_path"), r0_knots=m.get("r0_knots"))

    grid = d.get("grid")
    if not isinstance(grid, dict):
        raise ConfigError("grid", "must be a mapping of lists")
    for k, v in grid.items():
        if k not in GRID_KEYS:
            raise ConfigError(f"grid.{k}", f"unknown grid key; expected one of {GRID_KEYS}")
        if not isinstance(v, list) or not v:
            raise ConfigError(f"grid.{k}", "must be a nonempty list")
    if "N" not in grid:
        raise ConfigError("grid.N", "is required")
    for n in grid["N"]:
        if isinstance(n, bool) or not isinstance(n, int) or n < 1:
            raise ConfigError("grid.N", f"particle numbers must be positive integers, got {n!r}")
    for a in grid.get("alpha_target", []):
        if not 0 < a < 1:
            raise ConfigError("grid.alpha_target", f"must lie in (0, 1), got {a!r}")
    for b in grid.get("beta", []):
        if not 0 < b <= 1:
            raise ConfigError("grid.beta", f"must lie in (0, 1], got {b!r}")
    if "beta" in grid and method != "dgi":
        raise ConfigError("grid.beta", "only applies to the dgi method")

    n_iters = _int(d, "n_iters", minimum=1)
    burn_in = _int(d, "burn_in", 0, minimum=0)
    if n_iters <= burn_in:
        raise ConfigError("n_iters", f"must exceed burn_in ({n_iters} <= {burn_in})")
    thin = _int(d, "thin", 1, minimum=1)
    replicates = _int(d, "replicates", 1, minimum=1)
    seed = _int(d, "seed", 0, minimum=0)
    data_seed = _int(d, "data_seed", 0, minimum=0)
    selector = d.get("selector", "bs")
    if selector not in ("at", "bs"):
        raise ConfigError("selector", f"must be 'at' or 'bs', got {selector!r}")
    if selector == "at" and method in ("fdi-aswam", "dgi", "fdi-pg") and "beta" not in grid:
        raise ConfigError("selector", f"{method} adaptation needs backward sampling")
    adapt = d.get("adapt") or {}
    if not isinstance(adapt, dict):
        raise ConfigError("adapt", "must be a mapping")
    if adapt.get("stabilise", "off") not in ("off", "project", "reject"):
        raise ConfigError("adapt.stabilise", "must be off, project or reject")
    return ExperimentConfig(experiment=exp, method=method, model=model, grid=grid, n_iters=n_iters,
                            burn_in=burn_in, thin=thin, replicates=replicates, seed=seed,
                            data_seed=data_seed, selector=selector, adapt=adapt,
                            theta0=d.get("theta0"), out=str(d.get("out", "results")))
