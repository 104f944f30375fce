"""AdaC-GOPE: phased elimination on a G-optimal design with a private estimate.

Noise placement (``mode``):

* ``"half-power"`` -- ``theta_hat + V^{-1/2} N``, ``N ~ N(0, 2d / (rho c) I)``;
* ``"sum-noise"`` -- ``theta_hat + V^{-1} sum_{a in S} a N(0, 2 / rho)``;
* ``"none"`` -- the least-squares estimate itself.

When eliminations leave an active set that no longer spans R^d, the design
and the estimate are computed in an orthonormal basis of its span.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import ConfigError, LinearEnvironment, RegretTrace, RngStream, _as_generator
from ..design import DesignConvergenceError, DesignError, frank_wolfe_goptimal

__all__ = [
    "LinearConfig",
    "PhaseError",
    "eliminate_arms",
    "episode_length",
    "fixed_design_f",
    "interleave_schedule",
    "phase_confidence",
    "private_theta",
    "run_gope",
]

MODES = ("half-power", "sum-noise", "none")


class PhaseError(RuntimeError):
    """A GOPE phase could not be completed (singular Gram, design failure)."""


@dataclass(frozen=True)
class LinearConfig:
    delta: float = 0.001
    rho: float = 1.0
    mode: str = "half-power"
    private: bool = True
    tol: float = 1e-2
    seed: int = 0
    run: int = 0

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ConfigError("delta must lie in (0, 1)")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.private and not self.rho > 0:
            raise ConfigError("rho must be positive")
        if not self.private and self.mode != "none":
            object.__setattr__(self, "mode", "none")


def fixed_design_f(d: int, delta: float) -> float:
    """``d + 2 sqrt(d log(2/delta)) + 2 log(2/delta)``."""
    L = math.log(2.0 / delta)
    return d + 2.0 * math.sqrt(d * L) + 2.0 * L


def phase_confidence(delta: float, n_arms: int, phase: int) -> float:
    """Per-phase failure probability ``delta / (K l (l + 1))``."""
    return delta / (n_arms * phase * (phase + 1))


def episode_length(d: int, beta: float, delta_phase: float, rho: float) -> float:
    """Phase budget ``c_l``; ``rho = inf`` drops the privacy term."""
    if d < 1 or not beta > 0 or not 0 < delta_phase < 1 or not rho > 0:
        raise ValueError("episode_length needs d >= 1, beta > 0, delta in (0,1), rho > 0")
    base = 8.0 * d / beta**2 * math.log(4.0 / delta_phase)
    if math.isinf(rho):
        return base
    return base + 2.0 * d / beta * math.sqrt(2.0 / rho * fixed_design_f(d, delta_phase))


def _inv_sqrt(V: np.ndarray) -> np.ndarray:
    w, U = np.linalg.eigh(V)
    return (U / np.sqrt(w)) @ U.T


def private_theta(actions, rewards, V, rho: float, mode: str, rng, c: float = None,
                  dim: int = None, support=None) -> np.ndarray:
    """Least-squares estimate on one phase, privatised according to ``mode``.

    ``actions`` holds one row per play.  ``c`` (the phase budget) and ``dim``
    are needed by ``half-power``; ``support`` lists the distinct design
    actions for ``sum-noise`` (defaults to the unique rows of ``actions``).
    """
    A = np.atleast_2d(np.asarray(actions, dtype=float))
    r = np.asarray(rewards, dtype=float)
    V = np.asarray(V, dtype=float)
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}")
    w = np.linalg.eigvalsh(V)
    if w[0] <= 1e-12 * max(w[-1], 1e-300):
        raise PhaseError("phase Gram matrix is singular")
    theta_hat = np.linalg.solve(V, A.T @ r)
    if mode == "none":
        return theta_hat
    gen = _as_generator(rng)
    k = V.shape[0]
    if mode == "half-power":
        if c is None:
            raise ValueError("half-power noise needs the phase budget c")
        dim = k if dim is None else dim
        z = gen.standard_normal(k)
        scale = 0.0 if math.isinf(rho) else math.sqrt(2.0 * dim / (rho * c))
        return theta_hat + _inv_sqrt(V) @ (scale * z)
    S = np.unique(A, axis=0) if support is None else np.atleast_2d(np.asarray(support, float))
    z = gen.standard_normal(S.shape[0])
    scale = 0.0 if math.isinf(rho) else math.sqrt(2.0 / rho)
    return theta_hat + np.linalg.solve(V, S.T @ (scale * z))


def eliminate_arms(active, theta, beta: float) -> np.ndarray:
    """Boolean mask of the active arms whose empirical gap is at most ``2 beta``."""
    X = np.atleast_2d(np.asarray(active, dtype=float))
    scores = X @ np.asarray(theta, dtype=float)
    return scores.max() - scores <= 2.0 * beta


def interleave_schedule(actions, counts) -> np.ndarray:
    """Play order for one phase: each action's plays spread evenly in time.

    The ``j``-th play of an action with ``n`` plays sits at position
    ``(j + 1/2) / n``; ties go to the earlier action.  Every prefix of the
    schedule follows the design proportions up to one play per action.
    """
    actions = np.asarray(actions)
    counts = np.asarray(counts, dtype=np.int64)
    pos = np.concatenate([(np.arange(n) + 0.5) / n for n in counts if n > 0] or [np.empty(0)])
    who = np.repeat(actions, counts)
    return who[np.argsort(pos, kind="stable")]


def _span_basis(X: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    _, s, Vt = np.linalg.svd(X, full_matrices=False)
    rank = int(np.sum(s > tol * s[0]))
    return Vt[:rank].T


def run_gope(env: LinearEnvironment, horizon: int, config: LinearConfig, checkpoints=None,
             keep_steps: bool = False) -> RegretTrace:
    """Run AdaC-GOPE (or non-private GOPE when ``config.private`` is False).

    Phases that do not fit in the remaining horizon are truncated.  Reward
    noise comes from the ``env`` stream (one draw per play), privacy noise
    from the ``mechanism`` stream.
    """
    env_gen = RngStream(config.seed, config.run, "env").generator()
    mech_gen = RngStream(config.seed, config.run, "mechanism").generator()
    rho = config.rho if config.private else math.inf
    d, K = env.dim, env.n_arms
    means = env.mean_rewards
    gaps = env.gaps
    step_regret = np.empty(horizon)
    active = np.arange(K)
    phases = []
    t, ell = 0, 1
    while t < horizon:
        if active.size == 1:
            step_regret[t:] = gaps[active[0]]
            phases.append({"phase": ell, "active": 1, "length": horizon - t, "final": True})
            t = horizon
            break
        beta = 2.0 ** -ell
        X = env.actions[active]
        U = _span_basis(X)
        Y = X @ U
        try:
            design = frank_wolfe_goptimal(Y, tol=config.tol)
        except (DesignError, DesignConvergenceError) as exc:
            raise PhaseError(f"phase {ell}: design failed ({exc})") from exc
        delta_phase = phase_confidence(config.delta, K, ell)
        c = episode_length(d, beta, delta_phase, rho)
        support = design.support
        reps = np.ceil(c * design.weights[support]).astype(np.int64)
        plays = interleave_schedule(support, reps)
        n_play = min(plays.size, horizon - t)
        truncated = n_play < plays.size
        plays = plays[:n_play]
        rewards = env.draw(means[active[plays]], env_gen)
        step_regret[t:t + n_play] = gaps[active[plays]]
        t += n_play
        phases.append({
            "phase": ell, "beta": beta, "c": c, "support": int(support.size),
            "length": int(reps.sum()), "played": int(n_play), "active": int(active.size),
            "rank": int(U.shape[1]), "g": design.g,
        })
        if truncated:
            break
        Yp = Y[plays]
        V = (Y[support] * reps[:, None]).T @ Y[support]
        try:
            theta_r = private_theta(Yp, rewards, V, rho, config.mode, mech_gen, c=c, dim=d,
                                    support=Y[support])
        except PhaseError as exc:
            raise PhaseError(f"phase {ell}: {exc}") from exc
        keep = eliminate_arms(Y, theta_r, beta)
        phases[-1]["theta"] = (U @ theta_r).tolist()
        active = active[keep]
        ell += 1

    name = {"half-power": "adac-gope", "sum-noise": "adac-gope-var", "none": "gope"}[config.mode]
    return RegretTrace.from_step_regret(
        step_regret, checkpoints, keep_steps=keep_steps, run_seed=config.run, algo=name,
        rho=rho, info={"phases": phases, "active": active.tolist()},
    )
