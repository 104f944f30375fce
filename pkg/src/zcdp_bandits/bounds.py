"""Coupling-based KL bounds, minimax lower bounds and explicit regret upper bounds."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .core import DomainError

__all__ = [
    "coupling_hamming_moment",
    "gope_upper_order",
    "kl_interactive_bound",
    "kl_product_bound",
    "minimax_lower_bound",
    "oful_upper_order",
    "privacy_regime_threshold",
    "theoretical_ub_adacucb",
]


def _profile(t) -> np.ndarray:
    t = np.asarray(t, dtype=float).reshape(-1)
    if np.any(~np.isfinite(t)) or np.any(t < 0) or np.any(t > 1):
        raise DomainError("total variations must lie in [0, 1]")
    return t


def coupling_hamming_moment(t: Sequence[float]) -> float:
    """``E[d_Ham^2]`` under the maximal coupling: ``(sum t)^2 + sum t (1 - t)``.

    Under the coordinate-wise maximal coupling the disagreements are
    independent Bernoulli(``t_i``), so this is the second moment of their sum.
    """
    t = _profile(t)
    s = float(t.sum())
    return s * s + float(np.sum(t * (1.0 - t)))


def kl_product_bound(t: Sequence[float], rho: float) -> float:
    """KL upper bound between two product mechanisms' outputs under ``rho``-zCDP."""
    if rho < 0:
        raise DomainError("rho must be non-negative")
    return rho * coupling_hamming_moment(t)


def kl_interactive_bound(mean_sum: float, mean_weighted: float, variance: float, rho: float) -> float:
    """``rho (m^2 + w + v)`` for interactive policies (m, w, v: moments of ``sum t_{a_t}``)."""
    if min(mean_sum, mean_weighted, variance, rho) < 0:
        raise DomainError("inputs must be non-negative")
    return rho * (mean_sum**2 + mean_weighted + variance)


def minimax_lower_bound(setting: str, T: float, rho: float, K: int = None, d: int = None) -> float:
    """Minimax regret lower bound for ``rho``-zCDP policies.

    ``finite`` needs ``K > 1``, ``T >= K - 1`` and ``0 < rho <= 1``;
    ``linear`` (actions in ``[-1, 1]^d``) needs ``d >= 1``.
    """
    if not rho > 0:
        raise DomainError("rho must be positive")
    if setting == "finite":
        if K is None or K < 2:
            raise DomainError("finite setting needs K > 1")
        if T < K - 1:
            raise DomainError("finite setting needs T >= K - 1")
        if rho > 1:
            raise DomainError("finite-armed bound holds for rho <= 1")
        return max(math.sqrt(T * (K - 1)) / 27.0, math.sqrt((K - 1) / rho) / 124.0)
    if setting == "linear":
        if d is None or d < 1:
            raise DomainError("linear setting needs d >= 1")
        if T < 1:
            raise DomainError("T must be at least 1")
        return max(math.exp(-2.0) * d * math.sqrt(T) / 8.0, math.exp(-2.25) * d / (4.0 * math.sqrt(rho)))
    raise DomainError(f"unknown setting {setting!r}")


def privacy_regime_threshold(T: float) -> float:
    """Budget ``4 e^{-1/2} / T`` below which the private term of the linear bound dominates."""
    if T < 1:
        raise DomainError("T must be at least 1")
    return 4.0 * math.exp(-0.5) / T


def theoretical_ub_adacucb(gaps: Sequence[float], T: float, beta: float, rho: float,
                           variant: str = "dependent") -> float:
    """Explicit AdaC-UCB regret upper bound (``rho = inf`` drops the privacy term).

    ``dependent``: ``sum_{gap>0} 8 beta/gap log T + 8 sqrt(beta/rho) sqrt(log T) + 2 beta/(beta-3)``.
    ``minimax``: ``4 sqrt(2 beta K T log T) + 8 K sqrt(beta log T / rho) + 3 beta/(beta-3) sum gap``.
    """
    if not beta > 3:
        raise DomainError("the upper bound needs beta > 3")
    if not rho > 0 or T < 2:
        raise DomainError("need rho > 0 and T >= 2")
    g = np.asarray(gaps, dtype=float).reshape(-1)
    if np.any(g < 0):
        raise DomainError("gaps must be non-negative")
    L = math.log(T)
    priv = 0.0 if math.isinf(rho) else 8.0 * math.sqrt(beta / rho * L)
    if variant == "dependent":
        pos = g[g > 0]
        if pos.size == 0:
            raise DomainError("dependent bound needs at least one positive gap")
        return float(np.sum(8.0 * beta / pos * L + priv + 2.0 * beta / (beta - 3.0)))
    if variant == "minimax":
        K = g.size
        priv_k = 0.0 if math.isinf(rho) else 8.0 * K * math.sqrt(beta * L / rho)
        return 4.0 * math.sqrt(2.0 * beta * K * T * L) + priv_k + 3.0 * beta / (beta - 3.0) * float(g.sum())
    raise DomainError(f"unknown variant {variant!r}")


def gope_upper_order(d: int, K: int, T: float, rho: float, delta: float, A: float = 1.0, B: float = 1.0) -> float:
    """AdaC-GOPE bound shape with caller-supplied constants ``A``, ``B`` (not calibrated)."""
    if min(d, K) < 1 or T < 2 or not rho > 0 or not 0 < delta < 1:
        raise DomainError("need d, K >= 1, T >= 2, rho > 0, delta in (0, 1)")
    L = math.log(K * math.log(T) / delta)
    return A * math.sqrt(d * T * L) + B * d / math.sqrt(rho) * math.sqrt(L) * math.log(T)


def oful_upper_order(d: int, T: float, rho: float, A: float = 1.0, B: float = 1.0) -> float:
    """AdaC-OFUL bound shape ``A d log T sqrt(T) + B d^2 log(T)^2 / sqrt(rho)`` (not calibrated)."""
    if d < 1 or T < 2 or not rho > 0:
        raise DomainError("need d >= 1, T >= 2, rho > 0")
    L = math.log(T)
    return A * d * L * math.sqrt(T) + B * d * d * L * L / math.sqrt(rho)
