"""Exhaustive privacy audits of finite policies with binary rewards.

A policy is a list of decision tables.  The table of step ``t`` has one row
per history ``(a_1, r_1, ..., a_{t-1}, r_{t-1})``: each pair is the digit
``2 a + r`` in base ``2K`` and the first pair is the most significant digit
(for two arms this is the binary string ``a_1 r_1 a_2 r_2 ...``).

Three input models are supported:

* ``view``  -- a fixed list of observed rewards ``r``;
* ``table`` -- a table ``d`` of potential rewards, the reward at step ``t``
  being ``d[t][a_t]``;
* ``interactive`` -- a table plus a deterministic adversary that chooses the
  queried action from the policy's outputs so far.

For every neighbouring pair of inputs the exact output distributions over
``[K]^T`` are compared.  Approximate DP uses the pointwise characterisation
``delta*(eps) = sum max(P - e^eps Q, 0)``; zCDP is checked on a finite grid
of orders plus a max-divergence proxy.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from typing import Callable, Sequence

import numpy as np
from scipy.special import logsumexp

__all__ = [
    "ALPHA_GRID",
    "Adversary",
    "AuditError",
    "AuditReport",
    "FinitePolicy",
    "adversary_library",
    "all_lists",
    "all_tables",
    "audit_approx_dp",
    "audit_zcdp",
    "group_privacy_check",
    "list_to_table",
    "load_fixture",
    "mechanism_worst_delta",
    "minimal_epsilon",
    "neighbour_pairs",
    "pairwise_delta",
    "pairwise_renyi",
    "parallel_compose",
    "policy_output_dist",
    "randomized_response",
    "table_to_list",
]

MAX_OUTCOMES = 100_000
MAX_CELLS = 20_000_000
ALPHA_GRID = tuple(sorted({1.0 + 2.0 ** -k for k in range(11)} | {2.0, 4.0, 8.0, 16.0, 64.0}))
MODES = ("view", "table", "interactive")


class AuditError(ValueError):
    """Malformed policy or an enumeration beyond the size caps."""


def _parse_prob(x) -> float:
    if isinstance(x, str):
        return float(Fraction(x))
    return float(x)


@dataclass(frozen=True, eq=False)
class FinitePolicy:
    """Decision tables ``tables[t]`` of shape ``((2K)^t, K)`` for ``t = 0..T-1``."""

    horizon: int
    arms: int
    tables: tuple

    def __post_init__(self):
        if self.horizon < 1 or self.arms < 2:
            raise AuditError("need horizon >= 1 and at least two arms")
        if len(self.tables) != self.horizon:
            raise AuditError(f"expected {self.horizon} decision tables, got {len(self.tables)}")
        base = 2 * self.arms
        fixed = []
        for t, tab in enumerate(self.tables):
            arr = np.asarray(tab, dtype=float)
            if arr.shape != (base**t, self.arms):
                raise AuditError(f"table {t + 1} has shape {arr.shape}, expected {(base**t, self.arms)}")
            if np.any(arr < 0) or np.any(np.abs(arr.sum(axis=1) - 1.0) > 1e-9):
                raise AuditError(f"table {t + 1} rows must be probability vectors")
            arr.setflags(write=False)
            fixed.append(arr)
        object.__setattr__(self, "tables", tuple(fixed))

    @classmethod
    def from_dict(cls, data: dict) -> "FinitePolicy":
        try:
            tables = [[[_parse_prob(p) for p in row] for row in tab] for tab in data["tables"]]
            return cls(int(data["horizon"]), int(data["arms"]), tuple(tables))
        except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
            if isinstance(exc, AuditError):
                raise
            raise AuditError(f"malformed policy: {exc}") from exc

    @classmethod
    def from_json(cls, path) -> "FinitePolicy":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {"horizon": self.horizon, "arms": self.arms,
                "tables": [tab.tolist() for tab in self.tables]}

    @classmethod
    def uniform(cls, horizon: int, arms: int) -> "FinitePolicy":
        return cls.constant(horizon, arms, np.full(arms, 1.0 / arms))

    @classmethod
    def constant(cls, horizon: int, arms: int, probs) -> "FinitePolicy":
        """A policy that ignores its history (the same row everywhere)."""
        p = np.asarray(probs, dtype=float)
        return cls(horizon, arms, tuple(np.tile(p, ((2 * arms) ** t, 1)) for t in range(horizon)))

    @classmethod
    def random(cls, horizon: int, arms: int, rng: np.random.Generator,
               concentration: float = 1.0) -> "FinitePolicy":
        """Rows drawn i.i.d. from a symmetric Dirichlet."""
        tabs = tuple(rng.dirichlet(np.full(arms, concentration), size=(2 * arms) ** t)
                     for t in range(horizon))
        return cls(horizon, arms, tabs)

    def history_index(self, actions: Sequence[int], rewards: Sequence[int]) -> int:
        idx = 0
        for a, r in zip(actions, rewards):
            idx = idx * 2 * self.arms + 2 * int(a) + int(r)
        return idx

    def row(self, actions: Sequence[int], rewards: Sequence[int]) -> np.ndarray:
        """Action distribution after the given history (its length picks the step)."""
        if len(actions) != len(rewards) or len(actions) >= self.horizon:
            raise AuditError("history length must be below the horizon")
        return self.tables[len(actions)][self.history_index(actions, rewards)]


def load_fixture(name: str = "prop1e-policy") -> FinitePolicy:
    """Load a policy shipped with the package."""
    text = resources.files("zcdp_bandits").joinpath("fixtures", f"{name}.json").read_text()
    return FinitePolicy.from_dict(json.loads(text))


# ------------------------------------------------------------------ adversaries


@dataclass(frozen=True)
class Adversary:
    """Deterministic query rule: ``query(t, outputs[:t+1]) -> arm``.

    ``table`` maps each output prefix (tuple) to the queried arm.
    """

    name: str
    table: dict = field(repr=False)

    def query(self, prefix: tuple) -> int:
        return self.table[prefix]

    @classmethod
    def from_rule(cls, name: str, rule: Callable[[tuple], int], horizon: int, arms: int) -> "Adversary":
        table = {}
        for t in range(1, horizon + 1):
            for prefix in itertools.product(range(arms), repeat=t):
                table[prefix] = int(rule(prefix))
        return cls(name, table)


def adversary_library(horizon: int, arms: int, exhaustive_cap: int = 4096) -> list[Adversary]:
    """Identity, every constant-per-step query sequence, and all deterministic
    adversaries when there are at most ``exhaustive_cap`` of them."""
    lib = [Adversary.from_rule("identity", lambda p: p[-1], horizon, arms)]
    for seq in itertools.product(range(arms), repeat=horizon):
        lib.append(Adversary.from_rule(f"constant{seq}", lambda p, s=seq: s[len(p) - 1], horizon, arms))
    prefixes = [p for t in range(1, horizon + 1) for p in itertools.product(range(arms), repeat=t)]
    if arms ** len(prefixes) <= exhaustive_cap:
        for k, choice in enumerate(itertools.product(range(arms), repeat=len(prefixes))):
            lib.append(Adversary(f"deterministic{k}", dict(zip(prefixes, choice))))
    return lib


# ------------------------------------------------------------------ inputs


def all_lists(horizon: int) -> np.ndarray:
    """Every binary reward list, shape ``(2^T, T)``."""
    return np.array(list(itertools.product((0, 1), repeat=horizon)), dtype=np.int64).reshape(-1, horizon)


def all_tables(horizon: int, arms: int) -> np.ndarray:
    """Every binary reward table, shape ``(2^(KT), T, K)``."""
    rows = np.array(list(itertools.product((0, 1), repeat=arms)), dtype=np.int64)
    combos = itertools.product(range(rows.shape[0]), repeat=horizon)
    return np.array([rows[list(c)] for c in combos], dtype=np.int64).reshape(-1, horizon, arms)


def list_to_table(r: Sequence[int], arms: int) -> np.ndarray:
    """Table whose row ``t`` repeats ``r_t``: every action observes the listed rewards."""
    r = np.asarray(r, dtype=np.int64)
    return np.repeat(r[:, None], arms, axis=1)


def table_to_list(d, actions: Sequence[int]) -> np.ndarray:
    """Rewards read from table ``d`` along a fixed action sequence."""
    d = np.asarray(d)
    return d[np.arange(d.shape[0]), np.asarray(actions, dtype=np.int64)]


def neighbour_pairs(inputs: np.ndarray) -> np.ndarray:
    """Ordered index pairs ``(i, j)`` of inputs differing in exactly one step (row)."""
    n, T = inputs.shape[0], inputs.shape[1]
    flat = inputs.reshape(n, T, -1)
    diff = (flat[:, None] != flat[None, :]).any(axis=3).sum(axis=2)
    return np.argwhere(diff == 1)


# ------------------------------------------------------------------ distributions


def _outputs(horizon: int, arms: int) -> np.ndarray:
    if arms**horizon > MAX_OUTCOMES:
        raise AuditError(f"K^T = {arms**horizon} exceeds the enumeration cap {MAX_OUTCOMES}")
    return np.array(list(itertools.product(range(arms), repeat=horizon)), dtype=np.int64).reshape(-1, horizon)


def _path_probs(policy: FinitePolicy, outputs: np.ndarray, hist_actions: np.ndarray,
                hist_rewards: np.ndarray) -> np.ndarray:
    """``prod_t pi_t(o_t | history)``; the history arrays are (..., n_out, T)."""
    base = 2 * policy.arms
    prob = np.ones(hist_actions.shape)[..., 0]
    idx = np.zeros(prob.shape, dtype=np.int64)
    for t in range(policy.horizon):
        prob = prob * policy.tables[t][idx, outputs[:, t]]
        idx = idx * base + 2 * hist_actions[..., t] + hist_rewards[..., t]
    return prob


def policy_output_dist(policy: FinitePolicy, data, mode: str = "table", adversary: Adversary = None) -> np.ndarray:
    """Exact distribution over ``[K]^T`` (lexicographic order) for one input.

    ``data`` is a reward list for ``view`` and a ``(T, K)`` table otherwise.
    """
    return _dists(policy, np.asarray(data, dtype=np.int64)[None], mode, adversary)[0]


def _dists(policy: FinitePolicy, inputs: np.ndarray, mode: str, adversary: Adversary = None) -> np.ndarray:
    if mode not in MODES:
        raise AuditError(f"mode must be one of {MODES}")
    T, K = policy.horizon, policy.arms
    out = _outputs(T, K)
    if inputs.shape[0] * out.shape[0] * T > MAX_CELLS:
        raise AuditError("too many input/output combinations to enumerate")
    n = inputs.shape[0]
    if mode == "view":
        if inputs.shape[1:] != (T,):
            raise AuditError("view mode expects reward lists of length T")
        acts = np.broadcast_to(out, (n,) + out.shape)
        rews = np.broadcast_to(inputs[:, None, :], (n,) + out.shape)
        return _path_probs(policy, out, acts, rews)
    if inputs.shape[1:] != (T, K):
        raise AuditError("table modes expect (T, K) reward tables")
    if mode == "table":
        queries = out
    else:
        if adversary is None:
            raise AuditError("interactive mode needs an adversary")
        queries = np.array([[adversary.query(tuple(o[: t + 1])) for t in range(T)] for o in out.tolist()],
                           dtype=np.int64).reshape(out.shape)
    acts = np.broadcast_to(queries, (n,) + out.shape)
    rews = inputs[:, np.arange(T)[None, :], queries]
    return _path_probs(policy, out, acts, rews)


# ------------------------------------------------------------------ divergences on many pairs


def pairwise_delta(P: np.ndarray, Q: np.ndarray, eps: float) -> np.ndarray:
    """Row-wise ``sum max(P - e^eps Q, 0)``."""
    return np.maximum(P - math.exp(eps) * Q, 0.0).sum(axis=-1)


def pairwise_renyi(P: np.ndarray, Q: np.ndarray, alpha: float) -> np.ndarray:
    """Row-wise Rényi divergence of order ``alpha > 1`` (``inf`` gives the max-divergence)."""
    pos = P > 0
    bad = (pos & (Q <= 0)).any(axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        logP = np.where(pos, np.log(np.where(pos, P, 1.0)), -np.inf)
        logQ = np.log(np.where(Q > 0, Q, 1.0))
        if math.isinf(alpha):
            val = np.where(pos, logP - logQ, -np.inf).max(axis=-1)
        else:
            terms = np.where(pos, alpha * logP + (1.0 - alpha) * logQ, -np.inf)
            val = logsumexp(terms, axis=-1) / (alpha - 1.0)
    val = np.maximum(val, 0.0)
    return np.where(bad, np.inf, val)


# ------------------------------------------------------------------ audits


@dataclass
class AuditReport:
    mode: str
    budget: dict
    verdict: bool
    worst_pair: dict
    worst_value: float
    scope: str = ""

    def to_dict(self) -> dict:
        value = self.worst_value
        return {
            "mode": self.mode,
            "budget": self.budget,
            "verdict": "pass" if self.verdict else "fail",
            "worst_pair": self.worst_pair,
            "worst_delta_or_divergence": value if math.isfinite(value) else str(value),
            "scope": self.scope,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _inputs(policy: FinitePolicy, mode: str) -> np.ndarray:
    if mode == "view":
        return all_lists(policy.horizon)
    if 2 ** (policy.arms * policy.horizon) > 65_536:
        raise AuditError("too many reward tables to enumerate")
    return all_tables(policy.horizon, policy.arms)


def _pair_stats(policy: FinitePolicy, mode: str, stat: Callable, adversaries=None):
    """Apply ``stat(P, Q) -> per-pair values`` over every neighbouring pair (and adversary).

    Returns ``(values, pairs, inputs, adversary_names)`` with ``values`` of shape
    ``(n_adversaries, n_pairs)``.
    """
    inputs = _inputs(policy, mode)
    pairs = neighbour_pairs(inputs)
    if mode == "interactive":
        advs = adversary_library(policy.horizon, policy.arms) if adversaries is None else adversaries
    else:
        advs = [None]
    vals = []
    for adv in advs:
        D = _dists(policy, inputs, mode, adv)
        vals.append(stat(D[pairs[:, 0]], D[pairs[:, 1]]))
    names = [a.name for a in advs] if mode == "interactive" else [None]
    return np.array(vals), pairs, inputs, names


def _witness(vals, pairs, inputs, names) -> dict:
    k, p = np.unravel_index(int(np.argmax(vals)), vals.shape)
    out = {"input": inputs[pairs[p, 0]].tolist(), "neighbour": inputs[pairs[p, 1]].tolist()}
    if names[k] is not None:
        out["adversary"] = names[k]
    return out


def _scope(mode: str, names) -> str:
    if mode != "interactive":
        return f"exhaustive over all neighbouring {'lists' if mode == 'view' else 'tables'}"
    return f"adversary library of {len(names)} deterministic adversaries"


def audit_approx_dp(policy: FinitePolicy, eps: float, delta: float, mode: str = "table",
                    adversaries=None) -> AuditReport:
    """``(eps, delta)`` audit over all neighbouring inputs, both orderings of each pair."""
    if eps < 0 or not 0 <= delta <= 1:
        raise AuditError("need eps >= 0 and delta in [0, 1]")
    vals, pairs, inputs, names = _pair_stats(policy, mode, lambda P, Q: pairwise_delta(P, Q, eps), adversaries)
    worst = float(vals.max())
    return AuditReport(mode, {"eps": eps, "delta": delta}, worst <= delta + 1e-12,
                       _witness(vals, pairs, inputs, names), worst, _scope(mode, names))


def minimal_epsilon(policy: FinitePolicy, delta: float, mode: str = "table", tol: float = 1e-9,
                    adversaries=None) -> float:
    """Smallest ``eps`` with ``max delta*(eps) <= delta`` (bisection; ``delta*`` is nonincreasing)."""
    if not 0 <= delta <= 1:
        raise AuditError("delta must lie in [0, 1]")
    if mode == "interactive":
        advs = adversary_library(policy.horizon, policy.arms) if adversaries is None else adversaries
    else:
        advs = [None]
    inputs = _inputs(policy, mode)
    pairs = neighbour_pairs(inputs)
    Ps, Qs = [], []
    for adv in advs:
        D = _dists(policy, inputs, mode, adv)
        Ps.append(D[pairs[:, 0]])
        Qs.append(D[pairs[:, 1]])
    P, Q = np.concatenate(Ps), np.concatenate(Qs)

    def worst(e):
        return float(pairwise_delta(P, Q, e).max())

    if worst(0.0) <= delta:
        return 0.0
    hi = float(pairwise_renyi(P, Q, math.inf).max())
    if not math.isfinite(hi):
        hi = 1.0
        while worst(hi) > delta:
            hi *= 2.0
            if hi > 1e6:
                return math.inf
    lo = 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if worst(mid) <= delta:
            hi = mid
        else:
            lo = mid
    return hi


def audit_zcdp(policy: FinitePolicy, rho: float, alpha_grid: Sequence[float] = ALPHA_GRID,
               mode: str = "table", adversaries=None) -> AuditReport:
    """``rho``-zCDP audit on a finite grid of orders plus ``D_inf / max(grid)``.

    This approximates the all-orders condition; ``worst_value`` is the largest
    ``D_alpha / alpha`` seen over pairs and orders (the smallest ``rho`` that
    would pass on this grid).
    """
    grid = sorted(float(a) for a in alpha_grid)
    if not grid or grid[0] <= 1:
        raise AuditError("alpha grid must be non-empty with every alpha > 1")
    if rho < 0:
        raise AuditError("rho must be non-negative")

    def stat(P, Q):
        per_alpha = [pairwise_renyi(P, Q, a) / a for a in grid]
        per_alpha.append(pairwise_renyi(P, Q, math.inf) / grid[-1])
        return np.max(per_alpha, axis=0)

    vals, pairs, inputs, names = _pair_stats(policy, mode, stat, adversaries)
    worst = float(vals.max())
    ok = worst <= rho * (1 + 1e-12) + 1e-15
    return AuditReport(mode, {"rho": rho}, ok, _witness(vals, pairs, inputs, names), worst,
                       _scope(mode, names) + f"; {len(grid)} Renyi orders plus a max-divergence proxy")


def group_privacy_check(policy: FinitePolicy, actions: Sequence[int], r: Sequence[int],
                        r_prime: Sequence[int], rho: float) -> tuple[float, float]:
    """``(sum_t KL(pi_t(.|H) || pi_t(.|H')), rho * d_Ham(r, r')^2)`` along fixed actions."""
    T = policy.horizon
    if not (len(actions) == len(r) == len(r_prime) == T):
        raise AuditError("actions and reward lists must have length T")
    lhs = 0.0
    for t in range(T):
        p = policy.row(actions[:t], r[:t])
        q = policy.row(actions[:t], r_prime[:t])
        m = p > 0
        if np.any(q[m] == 0):
            lhs = math.inf
            break
        lhs += float(np.sum(p[m] * np.log(p[m] / q[m])))
    ham = sum(int(a != b) for a, b in zip(r, r_prime))
    return lhs, rho * ham**2


# ------------------------------------------------------------------ parallel composition


def randomized_response(eps: float) -> Callable[[Sequence[int]], np.ndarray]:
    """Per-bit randomized response on a block: each bit is kept w.p. ``e^eps / (1 + e^eps)``.

    The output distribution is over ``{0,1}^n`` in lexicographic order.
    """
    keep = math.exp(eps) / (1.0 + math.exp(eps))

    def mech(bits):
        bits = np.asarray(bits, dtype=np.int64)
        outs = np.array(list(itertools.product((0, 1), repeat=bits.size)), dtype=np.int64).reshape(-1, bits.size)
        same = outs == bits
        return np.where(same, keep, 1.0 - keep).prod(axis=1)

    return mech


def parallel_compose(mechanism: Callable[[Sequence[int]], np.ndarray], boundaries: Sequence[int],
                     data: Sequence[int]) -> np.ndarray:
    """Product of the block mechanisms' output distributions.

    ``boundaries`` are the block start indices, beginning with 0; blocks must
    cover ``data`` without overlap.
    """
    data = list(data)
    b = list(boundaries)
    if not b or b[0] != 0 or any(y <= x for x, y in zip(b, b[1:])) or b[-1] >= len(data):
        raise AuditError("boundaries must start at 0, increase strictly and stay inside the data")
    edges = b + [len(data)]
    dist = np.ones(1)
    for lo, hi in zip(edges, edges[1:]):
        dist = np.outer(dist, mechanism(data[lo:hi])).ravel()
    return dist


def mechanism_worst_delta(mechanism: Callable[[Sequence[int]], np.ndarray], n: int, eps: float) -> float:
    """Largest ``delta*(eps)`` over all neighbouring binary inputs of length ``n``."""
    inputs = all_lists(n)
    D = np.array([mechanism(x) for x in inputs])
    pairs = neighbour_pairs(inputs)
    return float(pairwise_delta(D[pairs[:, 0]], D[pairs[:, 1]], eps).max())

