"""Environments, reward sampling, regret accounting and the RNG contract.

Every random draw in a run comes from a :class:`RngStream` identified by
``(base_seed, run, component)``.  Components are isolated so that, for
instance, adding privacy-noise draws never shifts the reward draws of the
environment stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "COMPONENTS",
    "ConfigError",
    "ContextGenerator",
    "DomainError",
    "FiniteEnvironment",
    "LinearEnvironment",
    "RegretTrace",
    "RngStream",
    "generate_context_set",
    "log_checkpoints",
    "random_unit_vectors",
    "sample_reward",
    "suboptimality_gap",
]


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


class ConfigError(ValueError):
    """A configuration value is invalid."""


COMPONENTS = {"env": 0, "mechanism": 1, "policy": 2, "instance": 3, "contexts": 4}


@dataclass(frozen=True)
class RngStream:
    """Counter-based random stream keyed by ``(base_seed, run, component[, sub])``.

    Identical keys reproduce identical draws; distinct keys give independent
    Philox streams via :class:`numpy.random.SeedSequence` spawn keys.  ``sub``
    splits a component further (e.g. one reward stream per arm).
    """

    base_seed: int
    run: int = 0
    component: str = "env"
    sub: int = None

    def __post_init__(self):
        if self.component not in COMPONENTS:
            raise ConfigError(f"unknown RNG component {self.component!r}")
        if self.base_seed < 0 or self.run < 0 or (self.sub is not None and self.sub < 0):
            raise ConfigError("seeds and stream indices must be non-negative")

    def generator(self) -> np.random.Generator:
        key = (self.run, COMPONENTS[self.component])
        if self.sub is not None:
            key += (self.sub,)
        seq = np.random.SeedSequence(self.base_seed, spawn_key=key)
        return np.random.Generator(np.random.Philox(seq))


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError("rng must be an RngStream or numpy Generator")


# ------------------------------------------------------------------ environments


@dataclass(frozen=True)
class FiniteEnvironment:
    """K-armed stochastic bandit with means in [0, 1].

    ``reward_kind`` is ``"bernoulli"`` or ``"gaussian"`` (unit variance).
    Gaussian rewards are clipped to [0, 1] unless ``clip`` is False.
    """

    means: tuple
    reward_kind: str = "bernoulli"
    clip: bool = True

    def __post_init__(self):
        means = tuple(float(m) for m in self.means)
        object.__setattr__(self, "means", means)
        if len(means) < 2:
            raise ConfigError("a finite environment needs at least 2 arms")
        if any(not (0.0 <= m <= 1.0) for m in means):
            raise ConfigError("arm means must lie in [0, 1]")
        if self.reward_kind not in ("bernoulli", "gaussian"):
            raise ConfigError(f"unknown reward kind {self.reward_kind!r}")

    @property
    def n_arms(self) -> int:
        return len(self.means)

    @property
    def best_mean(self) -> float:
        return max(self.means)

    @property
    def gaps(self) -> np.ndarray:
        mu = np.asarray(self.means)
        return mu.max() - mu

    def _check(self, arm) -> int:
        if isinstance(arm, (bool, np.bool_)) or not isinstance(arm, (int, np.integer)):
            raise DomainError(f"arm must be an integer id, got {arm!r}")
        if not 0 <= arm < self.n_arms:
            raise DomainError(f"arm {arm} outside [0, {self.n_arms})")
        return int(arm)

    def draw(self, arm: int, n: int, gen: np.random.Generator) -> np.ndarray:
        """``n`` consecutive rewards of ``arm``; same values as ``n`` scalar draws."""
        mu = self.means[arm]
        if self.reward_kind == "bernoulli":
            return (gen.random(n) < mu).astype(float)
        r = mu + gen.standard_normal(n)
        return np.clip(r, 0.0, 1.0) if self.clip else r


@dataclass(frozen=True, eq=False)
class LinearEnvironment:
    """Fixed action set with linear mean rewards ``<theta*, a>``."""

    theta_star: np.ndarray
    actions: np.ndarray
    noise_std: float = 1.0
    clip: bool = True

    def __post_init__(self):
        theta = np.asarray(self.theta_star, dtype=float).reshape(-1)
        acts = np.atleast_2d(np.asarray(self.actions, dtype=float))
        if acts.shape[1] != theta.size:
            raise ConfigError("actions and theta_star dimensions differ")
        if np.linalg.norm(theta) > 1 + 1e-9:
            raise ConfigError("||theta*||_2 must be at most 1")
        if np.any(np.linalg.norm(acts, axis=1) > 1 + 1e-9):
            raise ConfigError("every action must have ||a||_2 <= 1")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be non-negative")
        theta.setflags(write=False)
        acts.setflags(write=False)
        object.__setattr__(self, "theta_star", theta)
        object.__setattr__(self, "actions", acts)

    @property
    def dim(self) -> int:
        return self.theta_star.size

    @property
    def n_arms(self) -> int:
        return self.actions.shape[0]

    @property
    def mean_rewards(self) -> np.ndarray:
        return self.actions @ self.theta_star

    @property
    def gaps(self) -> np.ndarray:
        mu = self.mean_rewards
        return mu.max() - mu

    def draw(self, mean: np.ndarray | float, gen: np.random.Generator) -> np.ndarray:
        """Noisy rewards for the given mean(s), one noise draw per entry."""
        mean = np.asarray(mean, dtype=float)
        r = mean + self.noise_std * gen.standard_normal(mean.shape)
        return np.clip(r, -1.0, 1.0) if self.clip else r


@dataclass(frozen=True, eq=False)
class ContextGenerator:
    """I.i.d. Gaussian context sets ``N(mean, cov)`` of ``k`` vectors.

    ``lambda0`` is the minimum eigenvalue of ``E[A A^T]`` carried for policy
    configuration.  When not given it is the analytic value ``cov + mean
    mean^T`` for unnormalised contexts, and a fixed-seed Monte-Carlo estimate
    when ``normalize`` is set.
    """

    dim: int
    k: int
    mean: np.ndarray = None
    cov: np.ndarray = None
    normalize: bool = False
    lambda0: float = None
    _factor: np.ndarray = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if self.dim < 1 or self.k < 1:
            raise ConfigError("context dimension and set size must be >= 1")
        mean = (
            np.full(self.dim, 1.0 / math.sqrt(self.dim))
            if self.mean is None
            else np.asarray(self.mean, dtype=float).reshape(-1)
        )
        cov = (
            np.eye(self.dim) / 10.0
            if self.cov is None
            else np.atleast_2d(np.asarray(self.cov, dtype=float))
        )
        if mean.size != self.dim or cov.shape != (self.dim, self.dim):
            raise ConfigError("mean/cov shapes do not match dim")
        if not np.allclose(cov, cov.T):
            raise ConfigError("covariance must be symmetric")
        w, U = np.linalg.eigh(cov)
        if w.min() < -1e-12 * max(1.0, abs(w.max())):
            raise ConfigError("covariance must be positive semi-definite")
        factor = U * np.sqrt(np.clip(w, 0.0, None))
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "_factor", factor)
        if self.lambda0 is None:
            object.__setattr__(self, "lambda0", self._default_lambda0())
        if not self.lambda0 > 0:
            raise ConfigError("lambda0 must be positive")

    def _default_lambda0(self) -> float:
        if not self.normalize:
            second = self.cov + np.outer(self.mean, self.mean)
        else:
            gen = RngStream(20240101, 0, "instance").generator()
            z = self.sample(200_000, gen)
            second = z.T @ z / z.shape[0]
        return float(np.linalg.eigvalsh(second)[0])

    def sample(self, n: int, gen: np.random.Generator) -> np.ndarray:
        """``n`` i.i.d. context vectors, shape ``(n, dim)``."""
        z = gen.standard_normal((n, self.dim))
        x = self.mean + z @ self._factor.T
        if self.normalize:
            x /= np.linalg.norm(x, axis=1, keepdims=True)
        return x

    def sample_sets(self, n_rounds: int, gen: np.random.Generator) -> np.ndarray:
        """Context sets for ``n_rounds`` consecutive steps, shape ``(n, k, dim)``."""
        return self.sample(n_rounds * self.k, gen).reshape(n_rounds, self.k, self.dim)


def random_unit_vectors(n: int, d: int, gen: np.random.Generator) -> np.ndarray:
    """Uniform points on the unit sphere of R^d."""
    x = gen.standard_normal((n, d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


# ------------------------------------------------------------------ operations


def sample_reward(env, action, rng) -> float:
    """Draw one reward for ``action``.

    ``action`` is an arm id for a :class:`FiniteEnvironment`, and either an
    arm id or a vector for a :class:`LinearEnvironment`.
    """
    gen = _as_generator(rng)
    if isinstance(env, FiniteEnvironment):
        return float(env.draw(env._check(action), 1, gen)[0])
    if isinstance(env, LinearEnvironment):
        vec = _linear_action(env, action)
        return float(env.draw(vec @ env.theta_star, gen))
    raise TypeError(f"unsupported environment {type(env).__name__}")


def _linear_action(env: LinearEnvironment, action) -> np.ndarray:
    if isinstance(action, (int, np.integer)) and not isinstance(action, bool):
        if not 0 <= action < env.n_arms:
            raise DomainError(f"action index {action} out of range")
        return env.actions[action]
    vec = np.asarray(action, dtype=float).reshape(-1)
    if vec.size != env.dim:
        raise DomainError("action has the wrong dimension")
    return vec


def suboptimality_gap(env, action) -> float:
    """Gap between the best mean reward and that of ``action``."""
    if isinstance(env, FiniteEnvironment):
        return float(env.best_mean - env.means[env._check(action)])
    if isinstance(env, LinearEnvironment):
        vec = _linear_action(env, action)
        return float(max(env.mean_rewards.max() - vec @ env.theta_star, 0.0))
    raise TypeError(f"unsupported environment {type(env).__name__}")


def generate_context_set(gen: ContextGenerator, rng) -> np.ndarray:
    """One context set: ``gen.k`` vectors of dimension ``gen.dim``."""
    return gen.sample(gen.k, _as_generator(rng))


# ------------------------------------------------------------------ regret traces


def log_checkpoints(horizon: int, n_points: int = 200) -> np.ndarray:
    """Strictly increasing, roughly log-spaced integers in [1, horizon].

    Powers of ten and ``horizon`` itself are always included.
    """
    if horizon < 1:
        raise DomainError("horizon must be >= 1")
    grid = np.round(np.logspace(0, math.log10(horizon), n_points)).astype(np.int64)
    decades = 10 ** np.arange(int(math.log10(horizon)) + 1, dtype=np.int64)
    pts = np.unique(np.concatenate([grid, decades, [horizon]]))
    return pts[(pts >= 1) & (pts <= horizon)]


@dataclass
class RegretTrace:
    """Cumulative pseudo-regret sampled at checkpoints."""

    t: np.ndarray
    regret: np.ndarray
    run_seed: int = 0
    algo: str = ""
    rho: float = math.inf
    per_step: np.ndarray | None = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=np.int64)
        self.regret = np.asarray(self.regret, dtype=float)
        if self.t.shape != self.regret.shape:
            raise ValueError("checkpoint and regret arrays differ in length")
        if self.t.size and np.any(np.diff(self.t) <= 0):
            raise ValueError("checkpoints must be strictly increasing")

    @classmethod
    def from_step_regret(cls, step_regret: Sequence[float], checkpoints=None,
                         keep_steps: bool = False, **kwargs) -> "RegretTrace":
        step = np.asarray(step_regret, dtype=float)
        if np.any(step < -1e-12):
            raise ValueError("per-step pseudo-regret must be non-negative")
        step = np.clip(step, 0.0, None)
        cum = np.cumsum(step)
        cps = log_checkpoints(step.size) if checkpoints is None else np.asarray(checkpoints)
        return cls(cps, cum[cps - 1], per_step=step if keep_steps else None, **kwargs)

    @property
    def final(self) -> float:
        return float(self.regret[-1]) if self.regret.size else 0.0

    def at(self, t: int) -> float:
        """Cumulative regret at checkpoint ``t`` (which must be recorded)."""
        idx = np.searchsorted(self.t, t)
        if idx >= self.t.size or self.t[idx] != t:
            raise KeyError(f"t={t} is not a checkpoint")
        return float(self.regret[idx])
