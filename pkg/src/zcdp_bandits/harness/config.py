"""Experiment configuration: JSON schema, defaults, validation and presets.

A config is a JSON object::

    {
      "name": "fig3-finite",
      "setting": "finite" | "linear" | "contextual",
      "environment": {...},          # per-setting, see ENV_DEFAULTS
      "algorithm": {...},            # per-setting, see ALGO_DEFAULTS
      "rho_grid": [0.01, 0.1, 1, 10],
      "horizon": 100000,
      "runs": 50,
      "base_seed": 0,
      "checkpoints": 200,            # number of log-spaced checkpoints
      "output_dir": "results/fig3-finite"
    }

``{"preset": "<name>", ...}`` starts from a preset and overrides the given
top-level fields; nested ``environment``/``algorithm`` objects are merged key
by key.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import asdict, dataclass, field

from ..core import ConfigError

__all__ = [
    "ALGO_DEFAULTS",
    "ENV_DEFAULTS",
    "ExperimentConfig",
    "PRESETS",
    "config_from_dict",
    "load_config",
    "preset",
]

SETTINGS = ("finite", "linear", "contextual")
DEFAULT_MEANS = [0.75, 0.625, 0.5, 0.375, 0.25]

ENV_DEFAULTS = {
    "finite": {"means": DEFAULT_MEANS, "reward_kind": "bernoulli", "clip": True},
    "linear": {"n_actions": 10, "dim": 3, "noise_std": 1.0, "clip": True,
               "actions": None, "theta_star": None},
    "contextual": {"dim": 3, "k": 10, "mean": None, "cov": None, "normalize": True,
                   "noise_std": 1.0, "clip": True, "theta_star": None, "lambda0": None},
}
ALGO_DEFAULTS = {
    "finite": {"beta": 1.0},
    "linear": {"delta": 0.001, "modes": ["half-power"], "tol": 0.01},
    "contextual": {"lam": 0.1, "C": 1.0, "delta": 0.001, "theta_bound": 1.0},
}
DESK = {"horizon": 100_000, "runs": 50}
FULL = {"horizon": 10_000_000, "runs": 100}


@dataclass
class ExperimentConfig:
    setting: str
    environment: dict = field(default_factory=dict)
    algorithm: dict = field(default_factory=dict)
    rho_grid: list = field(default_factory=lambda: [0.01, 0.1, 1.0, 10.0])
    horizon: int = DESK["horizon"]
    runs: int = DESK["runs"]
    base_seed: int = 0
    checkpoints: int = 200
    output_dir: str = "results"
    name: str = "experiment"

    def to_dict(self) -> dict:
        return asdict(self)

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


def _fail(path: str, msg: str):
    raise ConfigError(f"{path}: {msg}")


def _num(value, path: str, positive: bool = False, integer: bool = False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(path, f"expected a number, got {value!r}")
    if integer and (not float(value).is_integer()):
        _fail(path, f"expected an integer, got {value!r}")
    if not math.isfinite(value):
        _fail(path, "must be finite")
    if positive and not value > 0:
        _fail(path, f"must be positive, got {value!r}")
    return int(value) if integer else float(value)


def _merge(defaults: dict, given, path: str) -> dict:
    if given is None:
        given = {}
    if not isinstance(given, dict):
        _fail(path, "expected an object")
    unknown = sorted(set(given) - set(defaults))
    if unknown:
        _fail(f"{path}.{unknown[0]}", "unknown field")
    out = copy.deepcopy(defaults)
    out.update(copy.deepcopy(given))
    return out


def _check_env(setting: str, env: dict) -> None:
    p = "environment"
    if setting == "finite":
        means = env["means"]
        if not isinstance(means, list) or len(means) < 2:
            _fail(f"{p}.means", "need a list of at least two means")
        for i, m in enumerate(means):
            v = _num(m, f"{p}.means[{i}]")
            if not 0 <= v <= 1:
                _fail(f"{p}.means[{i}]", f"must lie in [0, 1], got {m!r}")
        if env["reward_kind"] not in ("bernoulli", "gaussian"):
            _fail(f"{p}.reward_kind", "must be 'bernoulli' or 'gaussian'")
    elif setting == "linear":
        _num(env["n_actions"], f"{p}.n_actions", positive=True, integer=True)
        _num(env["dim"], f"{p}.dim", positive=True, integer=True)
        if _num(env["noise_std"], f"{p}.noise_std") < 0:
            _fail(f"{p}.noise_std", "must be non-negative")
    else:
        _num(env["dim"], f"{p}.dim", positive=True, integer=True)
        _num(env["k"], f"{p}.k", positive=True, integer=True)
        if _num(env["noise_std"], f"{p}.noise_std") < 0:
            _fail(f"{p}.noise_std", "must be non-negative")
        if env["lambda0"] is not None:
            _num(env["lambda0"], f"{p}.lambda0", positive=True)
    if not isinstance(env.get("clip", True), bool):
        _fail(f"{p}.clip", "must be a boolean")


def _check_algo(setting: str, algo: dict) -> None:
    p = "algorithm"
    if setting == "finite":
        if _num(algo["beta"], f"{p}.beta", positive=True) <= 0:
            _fail(f"{p}.beta", "must be positive")
    elif setting == "linear":
        d = _num(algo["delta"], f"{p}.delta", positive=True)
        if d >= 1:
            _fail(f"{p}.delta", "must lie in (0, 1)")
        modes = algo["modes"]
        if not isinstance(modes, list) or not modes:
            _fail(f"{p}.modes", "need a non-empty list")
        for i, m in enumerate(modes):
            if m not in ("half-power", "sum-noise"):
                _fail(f"{p}.modes[{i}]", f"unknown noise mode {m!r}")
        if len(set(modes)) != len(modes):
            _fail(f"{p}.modes", "modes must be distinct")
        _num(algo["tol"], f"{p}.tol", positive=True)
    else:
        _num(algo["lam"], f"{p}.lam", positive=True)
        _num(algo["C"], f"{p}.C", positive=True)
        d = _num(algo["delta"], f"{p}.delta", positive=True)
        if d >= 1:
            _fail(f"{p}.delta", "must lie in (0, 1)")
        _num(algo["theta_bound"], f"{p}.theta_bound", positive=True)


_TOP = {"setting", "environment", "algorithm", "rho_grid", "horizon", "runs", "base_seed",
        "checkpoints", "output_dir", "name", "preset", "full_scale"}


def config_from_dict(data: dict) -> ExperimentConfig:
    """Validate ``data`` and fill defaults; errors name the offending field."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(data) - _TOP)
    if unknown:
        _fail(unknown[0], "unknown field")
    data = copy.deepcopy(data)
    if "preset" in data:
        name = data.pop("preset")
        base = preset(name, full_scale=bool(data.pop("full_scale", False))).to_dict()
        for key in ("environment", "algorithm"):
            if key in data:
                if not isinstance(data[key], dict):
                    _fail(key, "expected an object")
                base[key].update(data.pop(key))
        base.update(data)
        data = base
    elif data.pop("full_scale", False):
        data = {**data, **FULL}
    setting = data.get("setting")
    if setting not in SETTINGS:
        _fail("setting", f"must be one of {SETTINGS}, got {setting!r}")
    env = _merge(ENV_DEFAULTS[setting], data.get("environment"), "environment")
    algo = _merge(ALGO_DEFAULTS[setting], data.get("algorithm"), "algorithm")
    _check_env(setting, env)
    _check_algo(setting, algo)
    grid = data.get("rho_grid", [0.01, 0.1, 1.0, 10.0])
    if not isinstance(grid, list) or not grid:
        _fail("rho_grid", "need a non-empty list")
    grid = [_num(r, f"rho_grid[{i}]", positive=True) for i, r in enumerate(grid)]
    horizon = _num(data.get("horizon", DESK["horizon"]), "horizon", positive=True, integer=True)
    runs = _num(data.get("runs", DESK["runs"]), "runs", positive=True, integer=True)
    seed = _num(data.get("base_seed", 0), "base_seed", integer=True)
    if seed < 0:
        _fail("base_seed", "must be non-negative")
    cps = _num(data.get("checkpoints", 200), "checkpoints", positive=True, integer=True)
    if setting == "finite" and horizon < len(env["means"]):
        _fail("horizon", "must cover one initial pull of every arm")
    name = data.get("name", "experiment")
    out = data.get("output_dir", f"results/{name}")
    if not isinstance(name, str) or not isinstance(out, str):
        _fail("name" if not isinstance(name, str) else "output_dir", "expected a string")
    return ExperimentConfig(setting=setting, environment=env, algorithm=algo, rho_grid=grid,
                            horizon=horizon, runs=runs, base_seed=seed, checkpoints=cps,
                            output_dir=out, name=name)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return config_from_dict(data)


PRESETS = {
    "fig3-finite": {"setting": "finite", "rho_grid": [0.01, 0.1, 1.0, 10.0]},
    "fig3-linear": {"setting": "linear", "rho_grid": [0.01, 0.1, 1.0, 10.0]},
    "fig3-contextual": {"setting": "contextual", "rho_grid": [0.01, 0.1, 1.0, 10.0]},
    "fig7-gope": {"setting": "linear", "rho_grid": [0.001, 0.01, 0.1, 1.0],
                  "algorithm": {"modes": ["half-power", "sum-noise"]}},
}


def preset(name: str, full_scale: bool = False) -> ExperimentConfig:
    """A reference experiment setup at desk scale (``T = 1e5``, 50 runs) or full scale."""
    if name not in PRESETS:
        raise ConfigError(f"preset: unknown preset {name!r}; choose from {sorted(PRESETS)}")
    data = copy.deepcopy(PRESETS[name])
    data.update(FULL if full_scale else DESK)
    data.update(name=name, output_dir=f"results/{name}")
    return config_from_dict(data)
