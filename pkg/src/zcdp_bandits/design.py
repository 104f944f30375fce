"""G-optimal experimental design by Frank-Wolfe (Fedorov-Wynn) iterations.

The criterion stored here is the squared one,
``g(pi) = max_a a^T V(pi)^{-1} a``, whose optimum equals the dimension ``d``
(Kiefer-Wolfowitz).  ``f(pi) = log det V(pi)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Design",
    "DesignConvergenceError",
    "DesignError",
    "design_metrics",
    "frank_wolfe_goptimal",
]

_RIDGE = 1e-10
_TRUNCATE = 1e-6


class DesignError(ValueError):
    """The action set cannot support a design (e.g. it is rank deficient)."""


class DesignConvergenceError(RuntimeError):
    """Frank-Wolfe hit ``max_iter``; ``best`` holds the last iterate."""

    def __init__(self, message: str, best: "Design"):
        super().__init__(message)
        self.best = best


@dataclass
class Design:
    weights: np.ndarray
    actions: np.ndarray
    g: float
    f: float
    iterations: int = 0
    f_history: list = field(default_factory=list, repr=False)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.weights > 0)

    @property
    def support_size(self) -> int:
        return int(np.count_nonzero(self.weights > 0))

    @property
    def gram(self) -> np.ndarray:
        return gram(self.weights, self.actions)


def gram(weights, actions) -> np.ndarray:
    X = np.asarray(actions, dtype=float)
    return (X * np.asarray(weights, dtype=float)[:, None]).T @ X


def _leverages(V: np.ndarray, X: np.ndarray) -> np.ndarray:
    """``x^T V^{-1} x`` for every row, via a Cholesky factor of ``V``."""
    L = np.linalg.cholesky(V)
    Z = np.linalg.solve(L, X.T)
    return np.einsum("ij,ij->j", Z, Z)


def design_metrics(weights, actions) -> tuple[float, float, int]:
    """Exact ``(g, f, support_size)``; a singular Gram gives ``(inf, -inf, n)``."""
    X = np.atleast_2d(np.asarray(actions, dtype=float))
    w = np.asarray(weights, dtype=float)
    if w.shape != (X.shape[0],) or np.any(w < 0) or abs(w.sum() - 1) > 1e-9:
        raise DesignError("weights must be a probability vector over the actions")
    support = int(np.count_nonzero(w > 0))
    V = gram(w, X)
    d = X.shape[1]
    sign, logdet = np.linalg.slogdet(V)
    scale = max(np.trace(V) / d, np.finfo(float).tiny)
    if sign <= 0 or logdet - d * math.log(scale) < -30 * math.log(10):
        return math.inf, -math.inf, support
    try:
        g = float(_leverages(V, X).max())
    except np.linalg.LinAlgError:
        return math.inf, -math.inf, support
    return g, float(logdet), support


def _rank_completing_subset(X: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Indices of ``rank(X)`` rows spanning the row space, chosen greedily.

    Each pick is the row with the largest residual norm after projecting out
    the rows already chosen; near-ties (relative 1e-9) go to the lowest index,
    so the choice does not change when all actions are scaled together.
    """
    R = np.array(X, dtype=float)
    norms = np.linalg.norm(R, axis=1)
    if norms.size == 0 or norms.max() == 0:
        return np.zeros(0, dtype=np.int64)
    floor = tol * norms.max()
    chosen = []
    for _ in range(min(R.shape)):
        res = np.linalg.norm(R, axis=1)
        top = res.max()
        if top <= floor:
            break
        j = int(np.flatnonzero(res >= top * (1 - 1e-9))[0])
        chosen.append(j)
        u = R[j] / res[j]
        R -= np.outer(R @ u, u)
    return np.sort(np.array(chosen, dtype=np.int64))


def frank_wolfe_goptimal(actions, tol: float = 1e-2, max_iter: int = 10_000) -> Design:
    """Approximate G-optimal design with ``g(pi) <= d (1 + tol)``.

    Vanilla Frank-Wolfe on ``log det V(pi)`` with the exact line-search step
    ``(g/d - 1) / (g - 1)`` toward the vertex of largest leverage; starts
    uniform on a rank-completing subset.  Weights below 1e-6 are dropped
    afterwards when that keeps the tolerance.
    """
    X = np.atleast_2d(np.asarray(actions, dtype=float))
    if not tol > 0:
        raise DesignError("tol must be positive")
    n, d = X.shape
    if n == 0:
        raise DesignError("empty action set")
    basis = _rank_completing_subset(X)
    if basis.size < d:
        raise DesignError(f"actions span a {basis.size}-dimensional space, need {d}")

    w = np.zeros(n)
    w[basis] = 1.0 / d
    target = d * (1.0 + tol)
    ridge = _RIDGE * np.eye(d)
    f_hist = []
    it = 0
    while True:
        V = gram(w, X)
        lev = _leverages(V + ridge, X)
        j = int(np.argmax(lev))
        g = float(lev[j])
        f_hist.append(float(np.linalg.slogdet(V)[1]))
        if g <= target:
            break
        if it >= max_iter:
            best = _finish(w, X, it, f_hist)
            raise DesignConvergenceError(
                f"Frank-Wolfe stopped at g={g:.6g} > {target:.6g} after {it} iterations", best
            )
        step = (g / d - 1.0) / (g - 1.0)
        w *= 1.0 - step
        w[j] += step
        it += 1

    w = _truncate(w, X, target)
    return _finish(w, X, it, f_hist)


def _truncate(w: np.ndarray, X: np.ndarray, target: float) -> np.ndarray:
    small = (w > 0) & (w < _TRUNCATE)
    if not np.any(small):
        return w
    trial = np.where(small, 0.0, w)
    trial /= trial.sum()
    g, _, _ = design_metrics(trial, X)
    return trial if g <= target else w


def _finish(w, X, it, f_hist) -> Design:
    w = w / w.sum()
    g, f, _ = design_metrics(w, X)
    return Design(weights=w, actions=X, g=g, f=f, iterations=it, f_history=f_hist)
