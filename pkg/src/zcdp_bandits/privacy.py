"""Gaussian-mechanism calibration and divergences on finite distributions.

Conventions on finite supports: ``0 * log(0 / q) = 0`` and
``p * log(p / 0) = +inf``.  Rényi divergences are accumulated in log space
so large orders do not overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .core import DomainError, _as_generator

__all__ = [
    "PrivacyBudget",
    "add_gaussian_noise",
    "approx_dp_delta",
    "check_dist",
    "gaussian_renyi",
    "gaussian_sigma_sq",
    "kl_divergence",
    "max_divergence",
    "renyi_divergence",
    "tv_distance",
]


@dataclass(frozen=True)
class PrivacyBudget:
    """A privacy budget: ``zcdp(rho)``, ``approx(eps, delta)`` or ``rdp(alpha, eps)``."""

    kind: str
    rho: float = None
    eps: float = None
    delta: float = None
    alpha: float = None

    def __post_init__(self):
        if self.kind == "zcdp":
            if self.rho is None or not self.rho > 0:
                raise DomainError("zCDP budget needs rho > 0")
        elif self.kind == "approx":
            if self.eps is None or not self.eps > 0:
                raise DomainError("approximate DP budget needs eps > 0")
            if self.delta is None or not 0 < self.delta < 1:
                raise DomainError("the Gaussian mechanism needs delta in (0, 1)")
        elif self.kind == "rdp":
            if self.alpha is None or not self.alpha > 1:
                raise DomainError("RDP budget needs alpha > 1")
            if self.eps is None or not self.eps > 0:
                raise DomainError("RDP budget needs eps > 0")
        else:
            raise DomainError(f"unknown budget kind {self.kind!r}")

    @classmethod
    def zcdp(cls, rho: float) -> "PrivacyBudget":
        return cls("zcdp", rho=rho)

    @classmethod
    def approx(cls, eps: float, delta: float) -> "PrivacyBudget":
        return cls("approx", eps=eps, delta=delta)

    @classmethod
    def rdp(cls, alpha: float, eps: float) -> "PrivacyBudget":
        return cls("rdp", alpha=alpha, eps=eps)

    @property
    def noise_factor(self) -> float:
        """The constant ``b`` with ``sigma^2 = b * s^2``."""
        if self.kind == "zcdp":
            return 1.0 / (2.0 * self.rho)
        if self.kind == "approx":
            return 2.0 / self.eps**2 * math.log(1.25 / self.delta)
        return self.alpha / (2.0 * self.eps)


def gaussian_sigma_sq(sensitivity: float, budget: PrivacyBudget) -> float:
    """Noise variance of the Gaussian mechanism for an L2 ``sensitivity``."""
    if not sensitivity > 0:
        raise DomainError("sensitivity must be positive")
    if not isinstance(budget, PrivacyBudget):
        raise DomainError("budget must be a PrivacyBudget")
    return budget.noise_factor * sensitivity**2


def gaussian_renyi(sensitivity: float, sigma_sq: float, alpha: float) -> float:
    """Closed-form ``D_alpha(N(0, s^2) || N(s, s^2))``: ``alpha s^2 / (2 sigma^2)``."""
    return alpha * sensitivity**2 / (2.0 * sigma_sq)


def add_gaussian_noise(v, sigma_sq: float, rng) -> np.ndarray:
    """``v + z`` with ``z ~ N(0, sigma_sq I)``; ``sigma_sq = 0`` returns ``v``."""
    if sigma_sq < 0:
        raise DomainError("noise variance must be non-negative")
    v = np.asarray(v, dtype=float)
    gen = _as_generator(rng)
    z = gen.standard_normal(v.shape)
    if sigma_sq == 0:
        return v.copy()
    return v + math.sqrt(sigma_sq) * z


# ------------------------------------------------------------------ finite divergences


def check_dist(p, name: str = "distribution") -> np.ndarray:
    p = np.asarray(p, dtype=float).reshape(-1)
    if p.size == 0 or np.any(~np.isfinite(p)) or np.any(p < 0):
        raise DomainError(f"{name} must have finite non-negative weights")
    if abs(p.sum() - 1.0) > 1e-9:
        raise DomainError(f"{name} weights sum to {p.sum()!r}, not 1")
    return p


def _pair(P, Q):
    P, Q = check_dist(P, "P"), check_dist(Q, "Q")
    if P.shape != Q.shape:
        raise DomainError("P and Q have different supports")
    return P, Q


def kl_divergence(P, Q) -> float:
    P, Q = _pair(P, Q)
    m = P > 0
    if np.any(Q[m] == 0):
        return math.inf
    return max(float(np.sum(P[m] * (np.log(P[m]) - np.log(Q[m])))), 0.0)


def max_divergence(P, Q) -> float:
    """``log max_x P(x) / Q(x)`` (the order-infinity Rényi divergence)."""
    P, Q = _pair(P, Q)
    m = P > 0
    if np.any(Q[m] == 0):
        return math.inf
    return max(float(np.max(np.log(P[m]) - np.log(Q[m]))), 0.0)


def renyi_divergence(P, Q, alpha: float) -> float:
    """Rényi divergence of order ``alpha`` (``alpha = 1`` gives KL)."""
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    if alpha == 1:
        return kl_divergence(P, Q)
    if math.isinf(alpha):
        return max_divergence(P, Q)
    P, Q = _pair(P, Q)
    m = P > 0
    if alpha > 1:
        if np.any(Q[m] == 0):
            return math.inf
    else:
        m &= Q > 0
        if not np.any(m):
            return math.inf
    with np.errstate(divide="ignore"):
        terms = alpha * np.log(P[m]) + (1.0 - alpha) * np.log(Q[m])
    value = float(logsumexp(terms)) / (alpha - 1.0)
    return max(value, 0.0)


def tv_distance(P, Q) -> float:
    P, Q = _pair(P, Q)
    return 0.5 * float(np.abs(P - Q).sum())


def approx_dp_delta(P, Q, eps: float) -> float:
    """Smallest ``delta`` with ``P(A) <= e^eps Q(A) + delta`` for all events ``A``.

    On a finite space the supremum over events is attained by
    ``A = {x : P(x) > e^eps Q(x)}``, so it reduces to a pointwise sum.
    """
    if eps < 0:
        raise DomainError("eps must be non-negative")
    P, Q = _pair(P, Q)
    return float(np.maximum(P - math.exp(eps) * Q, 0.0).sum())
