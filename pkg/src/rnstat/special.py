"""Digamma, trigamma, and log-moments of the Beta distribution.

Every estimator weight in this package reduces to expectations of log W for
W ~ Beta(a, b) with small shapes, so this module is the single evaluator the
estimation modules share.  Digamma and trigamma are computed by upward
recurrence into the asymptotic regime followed by a Bernoulli-coefficient
tail; that keeps the small integer shapes exact to near machine precision
without an external special-function dependency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# Euler-Mascheroni constant, 20 digits.
EULER_MASCHERONI = 0.57721566490153286061

# Arguments are shifted at least this far before the asymptotic tail is used.
_ASYMPTOTIC_CUTOFF = 8.0


@dataclass(frozen=True)
class BetaParams:
    """Validated shape pair for a Beta distribution."""

    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError(f"Beta shapes must be positive, got ({self.a}, {self.b})")


def digamma(x: float) -> float:
    """Logarithmic derivative of the gamma function at ``x > 0``.

    For integer n this equals sum_{j<n} 1/j minus the Euler-Mascheroni
    constant; the recurrence keeps that identity to ~1e-14.
    """
    if not x > 0:
        raise ValueError(f"digamma requires x > 0, got {x}")
    acc = 0.0
    while x < _ASYMPTOTIC_CUTOFF:
        acc -= 1.0 / x
        x += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    tail = math.log(x) - 0.5 * inv - inv2 * (
        1.0 / 12.0
        - inv2 * (1.0 / 120.0
                  - inv2 * (1.0 / 252.0
                            - inv2 * (1.0 / 240.0
                                      - inv2 * (1.0 / 132.0
                                                - inv2 * (691.0 / 32760.0)))))
    )
    return acc + tail


def trigamma(x: float) -> float:
    """Derivative of :func:`digamma`; satisfies trigamma(x+1) = trigamma(x) - 1/x^2."""
    if not x > 0:
        raise ValueError(f"trigamma requires x > 0, got {x}")
    acc = 0.0
    while x < _ASYMPTOTIC_CUTOFF:
        acc += 1.0 / (x * x)
        x += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    tail = inv + 0.5 * inv2 + inv * inv2 * (
        1.0 / 6.0
        - inv2 * (1.0 / 30.0
                  - inv2 * (1.0 / 42.0
                            - inv2 * (1.0 / 30.0
                                      - inv2 * (5.0 / 66.0))))
    )
    return acc + tail


def log_beta(a: float, b: float) -> float:
    """log B(a, b) = log Gamma(a) + log Gamma(b) - log Gamma(a + b)."""
    _check_shapes(a, b)
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


def e_log_beta(a: float, b: float) -> float:
    """E[log W] for W ~ Beta(a, b): digamma(a) - digamma(a + b)."""
    _check_shapes(a, b)
    return digamma(a) - digamma(a + b)


def var_log_beta(a: float, b: float) -> float:
    """Var[log W] for W ~ Beta(a, b): trigamma(a) - trigamma(a + b)."""
    _check_shapes(a, b)
    return trigamma(a) - trigamma(a + b)


def e_log_sq_beta(a: float, b: float) -> float:
    """E[(log W)^2] for W ~ Beta(a, b)."""
    m = e_log_beta(a, b)
    return var_log_beta(a, b) + m * m


def harmonic(k: int, power: int = 1) -> float:
    """Partial sum of 1/j**power for j = 1..k.

    These sums are the extreme-order-statistic moments behind the
    nomination-design estimator weights.
    """
    if k < 0:
        raise ValueError(f"harmonic requires k >= 0, got {k}")
    return sum(1.0 / j**power for j in range(1, int(k) + 1))


def _check_shapes(a: float, b: float) -> None:
    if not (a > 0 and b > 0):
        raise ValueError(f"Beta shapes must be positive, got ({a}, {b})")
