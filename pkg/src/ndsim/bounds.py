"""Closed-form latency/duty-cycle relations for periodic-interval discovery."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

from .core import TimeMicros


class PreconditionViolated(ValueError):
    pass


class InfeasibleError(ValueError):
    pass


def _exact(x) -> Fraction:
    # floats are snapped to the nearest fraction with a small denominator so
    # that e.g. 1/3 does not turn into 3.0000000000000004 under the ceiling
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    return Fraction(x).limit_denominator(10**9)


def optimal_latency_exact(beta, gamma, omega) -> Fraction:
    b, g, w = _exact(beta), _exact(gamma), _exact(omega)
    if not (0 < b <= 1 and 0 < g <= 1):
        raise PreconditionViolated(f"duty cycles must lie in (0, 1], got beta={beta}, gamma={gamma}")
    return math.ceil(1 / g) * w / b + w


def optimal_latency(beta, gamma, omega: TimeMicros) -> TimeMicros:
    """Lowest achievable worst-case latency ``ceil(1/gamma) * omega/beta + omega``, in µs."""
    return round(optimal_latency_exact(beta, gamma, omega))


def solve_equal_duty(target_L: TimeMicros, omega: TimeMicros, tol: float = 1e-6) -> float:
    """Smallest ``beta = gamma`` whose optimal latency does not exceed ``target_L``.

    Latency is non-increasing in ``beta`` so plain bisection works; the
    returned value is the feasible end of the final bracket.
    """
    if target_L < 2 * omega:
        raise InfeasibleError(f"no duty cycle <= 1 reaches L={target_L} us with omega={omega} us")

    def ok(b: float) -> bool:
        return optimal_latency_exact(b, b, omega) <= target_L

    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def worst_case_latency_approx(
    T_a0: TimeMicros, rho_max: TimeMicros, T_s: TimeMicros, d_s: TimeMicros
) -> TimeMicros:
    """``T_s - d_s + T_a0 + rho_max``; only meaningful while ``T_a0 + rho_max < d_s``."""
    if T_a0 + rho_max >= d_s:
        raise PreconditionViolated(
            f"T_a0 + rho_max = {T_a0 + rho_max} us is not below d_s = {d_s} us; simulate instead"
        )
    return T_s - d_s + T_a0 + rho_max


@dataclass(frozen=True)
class EnergyBudget:
    beta: object
    gamma: object

    def __post_init__(self):
        if not (0 < self.beta <= 1 and 0 < self.gamma <= 1):
            raise PreconditionViolated(
                f"duty cycles must lie in (0, 1], got beta={self.beta}, gamma={self.gamma}"
            )

    @property
    def eta(self):
        return self.beta + self.gamma


def rescale_tradeoff(budget: EnergyBudget, k) -> EnergyBudget:
    """Trade channel utilisation for reception: ``(beta/k, gamma*k)``."""
    if k <= 0:
        raise PreconditionViolated("k must be positive")
    if isinstance(budget.beta, Rational) and isinstance(budget.gamma, Rational):
        k = _exact(k)
    beta, gamma = budget.beta / k, budget.gamma * k
    if beta > 1 or gamma > 1:
        raise PreconditionViolated(f"rescaled duty cycle out of range: beta={beta}, gamma={gamma}")
    return EnergyBudget(beta, gamma)
