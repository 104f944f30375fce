"""AdaC-OFUL: rarely-switching OFUL with cumulative Gaussian noise on the reward sum.

The estimate, the width and ``V_tau`` only change when the trigger fires, so
the steps of an episode can be chosen in one vectorised block.  Each block is
played optimistically with the frozen parameters; the running determinants of
``V`` along the block locate the first step where the trigger fires, and the
block is cut there.  Contexts come from a buffered stream (vectorised draws
equal per-step draws), so cutting a block never shifts later contexts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import ConfigError, ContextGenerator, RegretTrace, RngStream

__all__ = [
    "ContextualEnvironment",
    "OfulConfig",
    "chi2_tail_factor",
    "confidence_width",
    "episode_count_bound",
    "min_eig_floor",
    "run_oful",
    "select_action",
    "update_condition",
]


@dataclass(frozen=True, eq=False)
class ContextualEnvironment:
    """Rewards ``<theta*, a> + noise`` on context sets drawn from ``contexts``."""

    theta_star: np.ndarray
    contexts: ContextGenerator
    noise_std: float = 1.0
    clip: bool = True

    def __post_init__(self):
        theta = np.asarray(self.theta_star, dtype=float).reshape(-1)
        if theta.size != self.contexts.dim:
            raise ConfigError("theta_star and context dimensions differ")
        if np.linalg.norm(theta) > 1 + 1e-9:
            raise ConfigError("||theta*||_2 must be at most 1")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be non-negative")
        theta.setflags(write=False)
        object.__setattr__(self, "theta_star", theta)

    @property
    def dim(self) -> int:
        return self.theta_star.size


@dataclass(frozen=True)
class OfulConfig:
    lam: float = 0.1
    C: float = 1.0
    delta: float = 0.001
    rho: float = 1.0
    private: bool = True
    lambda0: float = None
    theta_bound: float = 1.0
    seed: int = 0
    run: int = 0

    def __post_init__(self):
        if not self.lam > 0:
            raise ConfigError("lambda must be positive")
        if not self.C > 0:
            raise ConfigError("C must be positive")
        if not 0 < self.delta < 1:
            raise ConfigError("delta must lie in (0, 1)")
        if self.private and not self.rho > 0:
            raise ConfigError("rho must be positive")
        if self.lambda0 is not None and not self.lambda0 > 0:
            raise ConfigError("lambda0 must be positive")


def update_condition(det_now: float, det_last: float, C: float) -> bool:
    """Rarely-switching trigger ``det_now > (1 + C) det_last`` (strict)."""
    return det_now > (1.0 + C) * det_last


def chi2_tail_factor(d: int, delta: float) -> float:
    """``d + 2 sqrt(d log(1/delta)) + 2 log(1/delta)``."""
    L = math.log(1.0 / delta)
    return d + 2.0 * math.sqrt(d * L) + 2.0 * L


def min_eig_floor(t: float, lambda0: float, delta: float, d: int) -> float:
    """High-probability floor on ``lambda_min(sum_s a_s a_s^T)``; negative for small ``t``."""
    L = math.log((t + 3.0) * d / delta)
    return lambda0 * t / 4.0 - 8.0 * L - 2.0 * math.sqrt(t * L)


def confidence_width(t: int, ell: int, lam: float, delta: float, d: int, rho: float,
                     lambda0: float, horizon: int, theta_bound: float = 1.0) -> float:
    """``beta_t + gamma_t / sqrt(t)``; ``rho = inf`` gives ``beta_t``.

    The denominator ``lambda + g(t)`` of the privacy term is floored at
    ``lambda``, which only widens the ellipsoid where ``g`` is negative.
    """
    if t < 1 or ell < 0:
        raise ConfigError("confidence_width needs t >= 1 and ell >= 0")
    beta = math.sqrt(2.0 * math.log(1.0 / delta) + d * math.log1p(t / (lam * d)))
    beta += math.sqrt(lam) * theta_bound
    if math.isinf(rho) or ell == 0:
        return beta
    denom = max(lam, lam + min_eig_floor(t, lambda0, delta, d))
    return beta + math.sqrt(2.0 * ell / rho * chi2_tail_factor(d, delta / horizon) / denom)


def select_action(actions, theta, width: float, V_inv) -> int:
    """Index of the optimistic action; ties go to the first one."""
    A = np.atleast_2d(np.asarray(actions, dtype=float))
    if A.shape[0] == 0:
        raise ConfigError("empty context set")
    norms = np.sqrt(np.einsum("ki,ij,kj->k", A, V_inv, A))
    return int(np.argmax(A @ theta + width * norms))


def episode_count_bound(horizon: float, C: float, lam: float, d: int) -> float:
    """Maximum number of updates ``d / log(1+C) * log(1 + T / (lam d))`` for unit actions."""
    return d / math.log1p(C) * math.log1p(horizon / (lam * d))


class _ContextBuffer:
    """Serves context sets in order from fixed-size vectorised draws."""

    def __init__(self, gen: ContextGenerator, rng: np.random.Generator, chunk: int = 4096):
        self.gen, self.rng, self.chunk = gen, rng, chunk
        self.buf = np.empty((0, gen.k, gen.dim))
        self.pos = 0

    def peek(self, n: int) -> np.ndarray:
        while self.buf.shape[0] - self.pos < n:
            more = self.gen.sample_sets(self.chunk, self.rng)
            self.buf = np.concatenate([self.buf[self.pos:], more])
            self.pos = 0
        return self.buf[self.pos:self.pos + n]

    def consume(self, n: int) -> None:
        self.pos += n


def run_oful(env: ContextualEnvironment, horizon: int, config: OfulConfig, checkpoints=None,
             keep_steps: bool = False, block: int = 256) -> RegretTrace:
    """Run AdaC-OFUL (or RS-OFUL when ``config.private`` is False).

    Streams: ``contexts`` for the context sets, ``env`` for reward noise (one
    draw per step), ``mechanism`` for the ``Y`` draws (one vector per update).
    ``info`` records every update step, the noise-draw count and the log
    determinant of ``V`` at each update.
    """
    ctx_gen = RngStream(config.seed, config.run, "contexts").generator()
    env_gen = RngStream(config.seed, config.run, "env").generator()
    mech_gen = RngStream(config.seed, config.run, "mechanism").generator()
    rho = config.rho if config.private else math.inf
    d = env.dim
    lam, C = config.lam, config.C
    lambda0 = env.contexts.lambda0 if config.lambda0 is None else config.lambda0
    theta_star = env.theta_star
    contexts = _ContextBuffer(env.contexts, ctx_gen)
    log_trigger = math.log1p(C)

    V = lam * np.eye(d)
    b = np.zeros(d)
    noise_sum = np.zeros(d)
    theta = np.zeros(d)
    V_tau_inv = np.eye(d) / lam
    logdet_tau = d * math.log(lam)
    width = confidence_width(1, 0, lam, config.delta, d, rho, lambda0, horizon, config.theta_bound)
    n_updates = 0
    updates = []
    step_regret = np.empty(horizon)

    t = 0  # steps played so far; the next step is t + 1
    while t < horizon:
        # trigger check at step t + 1 uses V_t
        logdet_now = np.linalg.slogdet(V)[1]
        if logdet_now > log_trigger + logdet_tau:
            if not math.isinf(rho):
                noise_sum += math.sqrt(2.0 / rho) * mech_gen.standard_normal(d)
            n_updates += 1
            theta = np.linalg.solve(V, b + noise_sum)
            V_tau_inv = np.linalg.inv(V)
            logdet_tau = logdet_now
            width = confidence_width(max(t, 1), n_updates, lam, config.delta, d, rho, lambda0,
                                     horizon, config.theta_bound)
            updates.append({"t": t + 1, "tau": t, "logdet": float(logdet_now), "width": width})

        n = min(block, horizon - t)
        sets = contexts.peek(n)
        norms = np.sqrt(np.einsum("nki,ij,nkj->nk", sets, V_tau_inv, sets))
        idx = np.argmax(sets @ theta + width * norms, axis=1)
        chosen = sets[np.arange(n), idx]
        # V after each played step of the block; the trigger may fire at step j+1 (j >= 1)
        Vs = V + np.cumsum(chosen[:, :, None] * chosen[:, None, :], axis=0)
        fired = np.flatnonzero(np.linalg.slogdet(Vs[:-1])[1] > log_trigger + logdet_tau)
        m = int(fired[0]) + 1 if fired.size else n
        chosen, sets = chosen[:m], sets[:m]
        means = chosen @ theta_star
        r = means + env.noise_std * env_gen.standard_normal(m)
        if env.clip:
            r = np.clip(r, -1.0, 1.0)
        step_regret[t:t + m] = (sets @ theta_star).max(axis=1) - means
        V = Vs[m - 1].copy()
        b += chosen.T @ r
        contexts.consume(m)
        t += m
        block = max(64, min(65536, m * 2))

    info = {
        "n_updates": n_updates,
        "noise_draws": n_updates if not math.isinf(rho) else 0,
        "updates": updates,
        "logdet_final": float(np.linalg.slogdet(V)[1]),
        "lambda0": lambda0,
    }
    return RegretTrace.from_step_regret(
        step_regret, checkpoints, keep_steps=keep_steps, run_seed=config.run,
        algo="adac-oful" if config.private else "rs-oful", rho=rho, info=info,
    )
