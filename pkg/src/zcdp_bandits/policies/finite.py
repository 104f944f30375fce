"""AdaC-UCB: episodic UCB with per-arm doubling, forgetting and Gaussian noise.

Each completed episode of an arm releases one noisy empirical mean of that
episode's rewards.  The noisy mean is reused in every later index of the arm
until the arm completes another episode; only the exploration bonus, which
depends on the episode start time, is recomputed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import ConfigError, DomainError, FiniteEnvironment, RegretTrace, RngStream, _as_generator

__all__ = ["FiniteConfig", "exploration_bonus", "private_index", "run_finite"]


@dataclass(frozen=True)
class FiniteConfig:
    beta: float = 1.0
    rho: float = 1.0
    private: bool = True
    seed: int = 0
    run: int = 0

    def __post_init__(self):
        if not self.beta > 0:
            raise ConfigError("beta must be positive")
        if self.private and not self.rho > 0:
            raise ConfigError("rho must be positive")


def _noise_var(n: float, rho: float, private: bool) -> float:
    if not private or math.isinf(rho):
        return 0.0
    return 1.0 / (2.0 * rho * n * n)


def exploration_bonus(n: float, t_ell: int, beta: float, rho: float, private: bool = True) -> float:
    """Bonus for an arm whose last episode holds ``n`` samples."""
    width = 1.0 / (2.0 * n)
    if private and not math.isinf(rho):
        width += 1.0 / (rho * n * n)
    return math.sqrt(width * beta * math.log(t_ell))


def private_index(mean: float, count: int, t_ell: int, beta: float, rho: float, rng,
                  private: bool = True) -> float:
    """Index of an arm pulled ``count`` times whose last episode has ``count / 2`` samples."""
    if count < 2:
        raise DomainError("private_index needs count >= 2 (a completed doubling episode)")
    if t_ell < 2 or not beta > 0:
        raise DomainError("need t_ell >= 2 and beta > 0")
    n = count / 2.0
    z = _as_generator(rng).standard_normal()
    sigma = math.sqrt(_noise_var(n, rho, private))
    return mean + sigma * z + exploration_bonus(n, t_ell, beta, rho, private)


def run_finite(env: FiniteEnvironment, horizon: int, config: FiniteConfig, checkpoints=None,
               keep_steps: bool = False, instrument: bool = False) -> RegretTrace:
    """Run AdaC-UCB (or its non-private counterpart) for ``horizon`` steps.

    Each arm has its own ``env`` sub-stream, so the n-th reward of an arm is
    the same whatever the play order (a fixed reward table); the Gaussian
    noise comes from the ``mechanism`` stream, one draw per completed
    episode, including the initial pull of every arm.
    """
    K = env.n_arms
    if horizon < K:
        raise ConfigError(f"horizon {horizon} shorter than the {K} initial pulls")
    env_gens = [RngStream(config.seed, config.run, "env", arm).generator() for arm in range(K)]
    mech_gen = RngStream(config.seed, config.run, "mechanism").generator()
    beta, rho, private = config.beta, config.rho, config.private

    gaps = env.gaps
    step_regret = np.empty(horizon)
    counts = np.zeros(K, dtype=np.int64)
    window = np.zeros(K)
    noisy_mean = np.zeros(K)
    episodes = []
    replay = [] if instrument else None
    rewards_log = np.empty(horizon) if instrument else None
    window_start = np.zeros(K, dtype=np.int64)

    def release(arm, rewards, start):
        n = rewards.size
        _check_rewards(rewards)
        z = mech_gen.standard_normal()
        noisy_mean[arm] = rewards.mean() + math.sqrt(_noise_var(n, rho, private)) * z
        window[arm] = n
        window_start[arm] = start

    for arm in range(K):
        r = env.draw(arm, 1, env_gens[arm])
        step_regret[arm] = gaps[arm]
        if instrument:
            rewards_log[arm] = r[0]
        counts[arm] = 1
        release(arm, r, arm)

    t = K
    while t < horizon:
        t_ell = t + 1
        bonus = np.array([exploration_bonus(window[a], t_ell, beta, rho, private) for a in range(K)])
        index = noisy_mean + bonus
        arm = int(np.argmax(index))
        if instrument:
            replay.append({"t_ell": t_ell, "index": index.copy(),
                           "windows": [(int(window_start[a]), int(window[a])) for a in range(K)]})
        length = int(counts[arm])
        n_play = min(length, horizon - t)
        rewards = env.draw(arm, n_play, env_gens[arm])
        step_regret[t:t + n_play] = gaps[arm]
        if instrument:
            rewards_log[t:t + n_play] = rewards
        complete = n_play == length
        episodes.append((arm, t, n_play, complete))
        if complete:
            release(arm, rewards, t)
            counts[arm] += length
        else:
            _check_rewards(rewards)
            counts[arm] += n_play
        t += n_play

    info = {"episodes": episodes, "counts": counts.tolist()}
    if instrument:
        info["replay"] = replay
        info["rewards"] = rewards_log
    return RegretTrace.from_step_regret(
        step_regret, checkpoints, keep_steps=keep_steps, run_seed=config.run,
        algo="adac-ucb" if private else "ucb", rho=rho if private else math.inf, info=info,
    )


def _check_rewards(rewards: np.ndarray) -> None:
    if np.any(rewards < 0.0) or np.any(rewards > 1.0):
        raise DomainError("AdaC-UCB requires rewards in [0, 1]; enable clipping")
