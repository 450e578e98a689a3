"""Closed-form decay bounds for the sparsified closed loop.

These are bookkeeping formulas: the constants they take (``gamma_bar``,
``K1``, ``lam``, ``T``, ``beta``) are existential in the stability argument, so
they are inputs here rather than something computed from a system.

Notation: ``theta = K1 * exp(-lam*T)`` for constant switching, and
``theta = K1 * exp(-lam*T) / beta`` for decreasing switching times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from rrsim.errors import DomainError

NO_BOUND = "no geometric bound"


def geometric_series(theta: float, n: int) -> float:
    """``sum_{i<n} theta**i`` by direct summation."""
    if n < 0:
        raise DomainError(f"n must be >= 0, got {n}")
    return math.fsum(theta**i for i in range(n))


def geometric_series_closed(theta: float, n: int) -> float:
    """Closed form of :func:`geometric_series`."""
    if n < 0:
        raise DomainError(f"n must be >= 0, got {n}")
    if theta == 1.0:
        return float(n)
    if theta > 0:
        # expm1 keeps accuracy for theta close to 1
        return -math.expm1(n * math.log(theta)) / (1.0 - theta)
    return (1.0 - theta**n) / (1.0 - theta)


def contraction_rate(lambda_prime: float, kappa: float, C: float) -> float:
    """``lambda = (1 - kappa) * lambda_prime / C**2``."""
    if not 0.0 < kappa < 1.0:
        raise DomainError(f"kappa must lie in (0, 1), got {kappa}")
    if C < 1.0:
        raise DomainError(f"overshoot constant must be >= 1, got {C}")
    if lambda_prime <= 0:
        raise DomainError(f"lambda_prime must be positive, got {lambda_prime}")
    return (1.0 - kappa) * lambda_prime / C**2


@dataclass(frozen=True)
class GeometricBound:
    """Gap bounds after ``n`` blocks of length ``T`` under constant switching.

    at_multiple: bound at ``t0 + n*T``.  general: bound anywhere in the
    ``n``-th block.  limit: uniform bound over all ``n`` (``None`` when
    ``theta >= 1``, see ``status``).
    """

    theta: float
    at_multiple: float
    general: float
    limit: Optional[float]
    status: str = "ok"

    def to_dict(self) -> dict:
        return {"theta": self.theta, "at_multiple": self.at_multiple, "general": self.general,
                "limit": self.limit, "status": self.status}


def geometric_bound(gamma_bar: float, K1: float, lam: float, T: float, n: int) -> GeometricBound:
    if n < 1:
        raise DomainError(f"cycle count must be >= 1, got {n}")
    theta = K1 * math.exp(-lam * T)
    s = geometric_series(theta, n)
    at_multiple = gamma_bar * s
    general = gamma_bar + K1 * gamma_bar * s
    if theta < 1.0:
        return GeometricBound(theta, at_multiple, general, gamma_bar * overshoot_factor(K1, theta))
    return GeometricBound(theta, at_multiple, general, None, NO_BOUND)


def overshoot_factor(K1: float, theta: float) -> float:
    """``K2 = 1 + K1/(1 - theta)``; requires ``theta < 1``."""
    if theta >= 1.0:
        raise DomainError(NO_BOUND)
    return 1.0 + K1 / (1.0 - theta)


@dataclass(frozen=True)
class GeometricBoundTV:
    """Gap bounds after ``n`` blocks when the dwell time shrinks by ``beta`` per block.

    full: the un-collapsed sum.  collapsed: ``beta**n * gamma_bar * K2``, the
    textbook closed form.  rigorous: ``beta**(n-1) * gamma_bar * (beta + K1/(1-theta))``,
    which always dominates ``full``; the collapsed form can fall below
    ``full`` (e.g. ``gamma_bar=K1=1, beta=0.5, exp(-lam*T)=0.25, n=2``).
    """

    theta: float
    full: float
    collapsed: Optional[float]
    rigorous: Optional[float]
    status: str = "ok"

    def to_dict(self) -> dict:
        return {"theta": self.theta, "full": self.full, "collapsed": self.collapsed,
                "rigorous": self.rigorous, "status": self.status}


def geometric_bound_tv(gamma_bar: float, K1: float, lam: float, T: float, beta: float,
                       n: int) -> GeometricBoundTV:
    if not 0.0 < beta <= 1.0:
        raise DomainError(f"beta must lie in (0, 1], got {beta}")
    if n < 0:
        raise DomainError(f"cycle count must be >= 0, got {n}")
    decay = math.exp(-lam * T)
    theta = K1 * decay / beta
    tail = math.fsum(beta ** (n - 1 - i) * K1**i * decay**i for i in range(n))
    full = beta**n * gamma_bar + K1 * gamma_bar * tail
    if theta >= 1.0:
        return GeometricBoundTV(theta, full, None, None, NO_BOUND)
    collapsed = beta**n * gamma_bar * overshoot_factor(K1, theta)
    rigorous = gamma_bar if n == 0 else beta ** (n - 1) * gamma_bar * (beta + K1 / (1.0 - theta))
    return GeometricBoundTV(theta, full, collapsed, rigorous)


def settling_time(eta: float, K2: float, gamma_bar: float, beta: float, T_prime: float) -> float:
    """Blocks needed before the gap stays below ``eta``: ``max(T', log(eta/(2 K2 gamma_bar))/log(beta))``.

    The result counts blocks of length ``T``; multiply by ``T`` for seconds.
    """
    if eta <= 0 or K2 <= 0 or gamma_bar <= 0:
        raise DomainError("eta, K2 and gamma_bar must be positive")
    if not 0.0 < beta < 1.0:
        raise DomainError(f"beta must lie in (0, 1), got {beta}")
    ratio = eta / (2.0 * K2 * gamma_bar)
    if ratio >= 1.0:
        return float(T_prime)
    return max(float(T_prime), math.log(ratio) / math.log(beta))
