"""Seeded Monte-Carlo execution over (variant, rho, run) cells and aggregation."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..core import (ConfigError, ContextGenerator, FiniteEnvironment, LinearEnvironment,
                    RegretTrace, RngStream, log_checkpoints, random_unit_vectors)
from ..policies.contextual import ContextualEnvironment, OfulConfig, run_oful
from ..policies.finite import FiniteConfig, run_finite
from ..policies.linear import LinearConfig, run_gope
from .config import ExperimentConfig

__all__ = [
    "Cell",
    "Summary",
    "WORKERS_ENV",
    "build_environment",
    "experiment_cells",
    "paired_gap_se",
    "private_algos",
    "run_cell",
    "run_experiment",
    "summarize",
]

WORKERS_ENV = "ZCDP_WORKERS"
NONPRIVATE_ALGO = {"finite": "ucb", "linear": "gope", "contextual": "rs-oful"}


def build_environment(config: ExperimentConfig):
    """The bandit instance; random parts come from the ``instance`` stream of run 0."""
    env = config.environment
    gen = RngStream(config.base_seed, 0, "instance").generator()
    if config.setting == "finite":
        return FiniteEnvironment(np.asarray(env["means"], dtype=float), env["reward_kind"], env["clip"])
    d = int(env["dim"])
    if config.setting == "linear":
        actions = env["actions"]
        if actions is None:
            actions = random_unit_vectors(int(env["n_actions"]), d, gen)
        theta = env["theta_star"]
        if theta is None:
            theta = random_unit_vectors(1, d, gen)[0]
        try:
            return LinearEnvironment(np.asarray(theta, float), np.asarray(actions, float),
                                     env["noise_std"], env["clip"])
        except ConfigError as exc:
            raise ConfigError(f"environment: {exc}") from exc
    kwargs = {"dim": d, "k": int(env["k"]), "normalize": env["normalize"], "lambda0": env["lambda0"]}
    if env["mean"] is not None:
        kwargs["mean"] = np.asarray(env["mean"], float)
    if env["cov"] is not None:
        kwargs["cov"] = np.asarray(env["cov"], float)
    theta = env["theta_star"]
    if theta is None:
        theta = random_unit_vectors(1, d, gen)[0]
    try:
        contexts = ContextGenerator(**kwargs)
        return ContextualEnvironment(np.asarray(theta, float), contexts, env["noise_std"], env["clip"])
    except ConfigError as exc:
        raise ConfigError(f"environment: {exc}") from exc


def private_algos(config: ExperimentConfig) -> list:
    """Names of the private variants compared against the non-private baseline."""
    if config.setting == "finite":
        return ["adac-ucb"]
    if config.setting == "linear":
        modes = config.algorithm["modes"]
        return ["adac-gope" if m == "half-power" else "adac-gope-var" for m in modes]
    return ["adac-oful"]


@dataclass(frozen=True)
class Cell:
    """One policy execution: ``rho = inf`` is the non-private baseline."""

    algo: str
    rho: float
    run: int


def experiment_cells(config: ExperimentConfig) -> list:
    """Cells in merge order: per run, the baseline then every (variant, rho).

    The baseline does not depend on ``rho``, so it is run once per run index
    and paired with every private cell of that run.
    """
    base = NONPRIVATE_ALGO[config.setting]
    cells = []
    for run in range(config.runs):
        cells.append(Cell(base, math.inf, run))
        for algo in private_algos(config):
            for rho in _unique(config.rho_grid):
                cells.append(Cell(algo, rho, run))
    return cells


def _unique(values) -> list:
    out = []
    for v in values:
        if v not in out:
            out.append(v)
    return out


def run_cell(config: ExperimentConfig, env, cell: Cell, checkpoints) -> RegretTrace:
    private = not math.isinf(cell.rho)
    rho = cell.rho if private else 1.0
    algo = config.algorithm
    seed = config.base_seed
    try:
        if config.setting == "finite":
            cfg = FiniteConfig(beta=algo["beta"], rho=rho, private=private, seed=seed, run=cell.run)
            return run_finite(env, config.horizon, cfg, checkpoints)
        if config.setting == "linear":
            mode = "sum-noise" if cell.algo == "adac-gope-var" else "half-power"
            cfg = LinearConfig(delta=algo["delta"], rho=rho, mode=mode, private=private,
                               tol=algo["tol"], seed=seed, run=cell.run)
            return run_gope(env, config.horizon, cfg, checkpoints)
        cfg = OfulConfig(lam=algo["lam"], C=algo["C"], delta=algo["delta"], rho=rho, private=private,
                         theta_bound=algo["theta_bound"], seed=seed, run=cell.run)
        return run_oful(env, config.horizon, cfg, checkpoints)
    except (ConfigError, ValueError) as exc:
        raise type(exc)(f"{cell.algo} rho={cell.rho} run={cell.run}: {exc}") from exc


def _job(args):
    config, env, cell, checkpoints = args
    trace = run_cell(config, env, cell, checkpoints)
    # the per-update log is large and not persisted; keep scalar diagnostics only
    trace.info = {k: v for k, v in trace.info.items() if np.isscalar(v)}
    return trace


def _workers(workers) -> int:
    if workers is None:
        raw = os.environ.get(WORKERS_ENV, "1")
        try:
            workers = int(raw)
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV}: expected an integer, got {raw!r}") from None
    if workers < 1:
        raise ConfigError(f"{WORKERS_ENV}: worker count must be at least 1")
    return workers


@dataclass
class Summary:
    """Aggregate rows, one per (private variant, rho, checkpoint)."""

    setting: str
    algo: list
    rho: np.ndarray
    t: np.ndarray
    mean_priv: np.ndarray
    std_priv: np.ndarray
    mean_nonpriv: np.ndarray
    std_nonpriv: np.ndarray
    gap: np.ndarray
    pop: np.ndarray

    FIELDS = ("rho", "t", "mean_priv", "std_priv", "mean_nonpriv", "std_nonpriv", "gap", "pop")

    def __len__(self) -> int:
        return len(self.t)

    def select(self, algo: str = None, rho: float = None) -> "Summary":
        mask = np.ones(len(self), dtype=bool)
        if algo is not None:
            mask &= np.array([a == algo for a in self.algo], dtype=bool)
        if rho is not None:
            mask &= self.rho == rho
        return Summary(self.setting, [a for a, m in zip(self.algo, mask) if m],
                       *(getattr(self, f)[mask] for f in self.FIELDS))

    def row(self, algo: str, rho: float, t: int) -> dict:
        s = self.select(algo, rho)
        hit = np.flatnonzero(s.t == t)
        if hit.size == 0:
            raise KeyError(f"no summary row for {algo} rho={rho} t={t}")
        i = hit[0]
        return {f: float(getattr(s, f)[i]) for f in self.FIELDS}

    def equals(self, other: "Summary") -> bool:
        """Exact equality, with NaN matching NaN."""
        if self.setting != other.setting or list(self.algo) != list(other.algo):
            return False
        return all(np.array_equal(getattr(self, f), getattr(other, f), equal_nan=True)
                   for f in self.FIELDS)


def _stats(values: np.ndarray):
    mean = values.mean(axis=0)
    std = values.std(axis=0, ddof=1) if values.shape[0] > 1 else np.zeros(values.shape[1])
    return mean, std


def summarize(setting: str, traces: list) -> Summary:
    """Mean/std per checkpoint of private and non-private regret, gap and PoP.

    PoP is NaN where the mean non-private regret is 0.
    """
    base = [tr for tr in traces if math.isinf(tr.rho)]
    priv = [tr for tr in traces if not math.isinf(tr.rho)]
    cols = {f: [] for f in Summary.FIELDS}
    algos = []
    if not base or not priv:
        return Summary(setting, [], *(np.empty(0) for _ in Summary.FIELDS))
    t = base[0].t
    mean_np, std_np = _stats(np.stack([tr.regret for tr in sorted(base, key=lambda x: x.run_seed)]))
    keys = []
    for tr in priv:
        if (tr.algo, tr.rho) not in keys:
            keys.append((tr.algo, tr.rho))
    for algo, rho in keys:
        group = sorted((tr for tr in priv if tr.algo == algo and tr.rho == rho), key=lambda x: x.run_seed)
        mean_p, std_p = _stats(np.stack([tr.regret for tr in group]))
        gap = mean_p - mean_np
        with np.errstate(divide="ignore", invalid="ignore"):
            pop = np.where(mean_np > 0, gap / np.where(mean_np > 0, mean_np, 1.0), np.nan)
        for name, arr in zip(Summary.FIELDS, (np.full(t.size, rho), t, mean_p, std_p, mean_np,
                                              std_np, gap, pop)):
            cols[name].append(np.asarray(arr, dtype=float))
        algos += [algo] * t.size
    out = {f: np.concatenate(v) for f, v in cols.items()}
    out["t"] = out["t"].astype(np.int64)
    return Summary(setting, algos, **out)


def paired_gap_se(traces: list, algo: str, rho: float, t: int) -> float:
    """Standard error of the mean of per-run paired regret differences at checkpoint ``t``."""
    base = {tr.run_seed: tr.at(t) for tr in traces if math.isinf(tr.rho)}
    diffs = np.array([tr.at(t) - base[tr.run_seed] for tr in traces
                      if tr.algo == algo and tr.rho == rho])
    if diffs.size < 2:
        return math.nan
    return float(diffs.std(ddof=1) / math.sqrt(diffs.size))


def run_experiment(config: ExperimentConfig, workers: int = None):
    """Execute every cell and aggregate; returns ``(traces, summary)``.

    Cells are dispatched to ``workers`` processes (default from the
    ``ZCDP_WORKERS`` environment variable, else 1) and merged in cell order,
    so the result does not depend on the worker count.
    """
    env = build_environment(config)
    checkpoints = log_checkpoints(config.horizon, config.checkpoints)
    cells = experiment_cells(config)
    jobs = [(config, env, cell, checkpoints) for cell in cells]
    n = _workers(workers)
    if n == 1:
        traces = [_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=n) as pool:
            traces = list(pool.map(_job, jobs, chunksize=max(1, len(jobs) // (4 * n))))
    for cell, tr in zip(cells, traces):
        tr.algo = cell.algo
    # every listed rho (duplicates included) gets its rows
    summary = summarize(config.setting, traces)
    return traces, _expand_duplicates(summary, config, traces)


def _expand_duplicates(summary: Summary, config: ExperimentConfig, traces: list) -> Summary:
    if len(_unique(config.rho_grid)) == len(config.rho_grid):
        return summary
    parts = [summary.select(algo, rho) for algo in private_algos(config) for rho in config.rho_grid]
    return Summary(config.setting, [a for p in parts for a in p.algo],
                   *(np.concatenate([getattr(p, f) for p in parts]) for f in Summary.FIELDS))
