"""Proportional hazard rate and proportional reverse hazard rate families.

A family is a baseline distribution F0 together with a transform driven by a
single positive parameter gamma:

* PHR:  F(x; gamma) = 1 - (1 - F0(x))**(1/gamma)
* PRHR: F(x; gamma) = F0(x)**(1/gamma)

Both transforms define a pivot -log(1 - F0(X)) (PHR) or -log F0(X) (PRHR)
that is exponential with mean gamma; every estimator in this package works on
that pivot.  The hazard and reverse hazard methods always return nonnegative
rates f0/(gamma*(1-F0)) and f0/(gamma*F0), regardless of how a particular
parameterization might be quoted elsewhere with a differentiated sign.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

PHR = "phr"
PRHR = "prhr"


@dataclass(frozen=True)
class Baseline:
    """A baseline distribution F0 with the transforms the families need.

    ``support`` is the closure (c, d) with F0(c) = 0 and F0(d) = 1; endpoints
    may be infinite.  All callables accept scalars or numpy arrays.
    """

    name: str
    support: tuple[float, float]
    cdf0: Callable
    pdf0: Callable
    ppf0: Callable
    isf0: Callable
    log_cdf0: Callable
    log_sf0: Callable
    log_pdf0: Callable


def _exp_pdf0(x):
    x = np.asarray(x, dtype=float)
    return np.where(x >= 0, np.exp(-x), 0.0)


STD_EXPONENTIAL = Baseline(
    name="std-exponential",
    support=(0.0, math.inf),
    cdf0=lambda x: -np.expm1(-np.asarray(x, dtype=float)),
    pdf0=_exp_pdf0,
    ppf0=lambda p: -np.log1p(-np.asarray(p, dtype=float)),
    isf0=lambda q: -np.log(np.asarray(q, dtype=float)),
    log_cdf0=lambda x: np.log(-np.expm1(-np.asarray(x, dtype=float))),
    log_sf0=lambda x: -np.asarray(x, dtype=float),
    log_pdf0=lambda x: -np.asarray(x, dtype=float),
)

PARETO_NU1 = Baseline(
    name="pareto-nu1",
    support=(1.0, math.inf),
    cdf0=lambda x: 1.0 - 1.0 / np.asarray(x, dtype=float),
    pdf0=lambda x: np.asarray(x, dtype=float) ** -2.0,
    ppf0=lambda p: 1.0 / (1.0 - np.asarray(p, dtype=float)),
    isf0=lambda q: 1.0 / np.asarray(q, dtype=float),
    log_cdf0=lambda x: np.log1p(-1.0 / np.asarray(x, dtype=float)),
    log_sf0=lambda x: -np.log(np.asarray(x, dtype=float)),
    log_pdf0=lambda x: -2.0 * np.log(np.asarray(x, dtype=float)),
)

UNIFORM_BASE = Baseline(
    name="uniform-base",
    support=(0.0, 1.0),
    cdf0=lambda x: np.asarray(x, dtype=float),
    pdf0=lambda x: np.ones_like(np.asarray(x, dtype=float)),
    ppf0=lambda p: np.asarray(p, dtype=float),
    isf0=lambda q: 1.0 - np.asarray(q, dtype=float),
    log_cdf0=lambda x: np.log(np.asarray(x, dtype=float)),
    log_sf0=lambda x: np.log1p(-np.asarray(x, dtype=float)),
    log_pdf0=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
)

# Same baseline CDF as the standard exponential; paired with the PRHR
# transform it yields the generalized-exponential family (1-e^-x)**(1/gamma).
GEXP_BASE = replace(STD_EXPONENTIAL, name="gexp-base")


@dataclass(frozen=True)
class ModelFamily:
    """One row of the model table: a transform kind plus a baseline."""

    kind: str
    baseline: Baseline

    def __post_init__(self):
        if self.kind not in (PHR, PRHR):
            raise ValueError(f"kind must be '{PHR}' or '{PRHR}', got {self.kind!r}")

    @property
    def support(self) -> tuple[float, float]:
        return self.baseline.support

    def cdf(self, x, gamma: float):
        """Distribution function; clamps to 0/1 outside the support."""
        _check_gamma(gamma)
        x = np.asarray(x, dtype=float)
        c, d = self.support
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            if self.kind == PHR:
                inner = -np.expm1(self.baseline.log_sf0(np.clip(x, c, d)) / gamma)
            else:
                inner = np.exp(self.baseline.log_cdf0(np.clip(x, c, d)) / gamma)
        out = np.where(x <= c, 0.0, np.where(x >= d, 1.0, inner))
        return out if out.shape else float(out)

    def pdf(self, x, gamma: float):
        """Density of the transformed family; zero outside the support."""
        _check_gamma(gamma)
        x = np.asarray(x, dtype=float)
        c, d = self.support
        inside = (x >= c) & (x <= d)
        xs = np.clip(x, c, d)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            if self.kind == PHR:
                body = self.baseline.pdf0(xs) / gamma * np.exp(
                    (1.0 / gamma - 1.0) * self.baseline.log_sf0(xs))
            else:
                body = self.baseline.pdf0(xs) / gamma * np.exp(
                    (1.0 / gamma - 1.0) * self.baseline.log_cdf0(xs))
        out = np.where(inside, body, 0.0)
        return out if out.shape else float(out)

    def log_pdf(self, x, gamma: float):
        """Log density, expressed through the pivot for numerical stability."""
        _check_gamma(gamma)
        t = self.pivot(x)
        return -math.log(gamma) + self.baseline.log_pdf0(np.asarray(x, dtype=float)) \
            + t * (1.0 - 1.0 / gamma)

    def quantile(self, u, gamma: float):
        """Inverse of :meth:`cdf` on [0, 1]; exact at the endpoints."""
        _check_gamma(gamma)
        u = np.asarray(u, dtype=float)
        if np.any((u < 0) | (u > 1)):
            raise ValueError("quantile requires u in [0, 1]")
        with np.errstate(divide="ignore"):
            if self.kind == PHR:
                out = self.baseline.isf0(np.exp(gamma * np.log1p(-u)))
            else:
                out = self.baseline.ppf0(np.exp(gamma * np.log(u)))
        return out if out.shape else float(out)

    def hazard(self, x, gamma: float):
        """Failure rate f0/(gamma*(1-F0)); +inf where the survival mass vanishes."""
        _check_gamma(gamma)
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out = self.baseline.pdf0(x) / (gamma * (1.0 - self.baseline.cdf0(x)))
        return out if out.shape else float(out)

    def reverse_hazard(self, x, gamma: float):
        """Reverse rate f0/(gamma*F0); +inf at the lower support edge."""
        _check_gamma(gamma)
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out = self.baseline.pdf0(x) / (gamma * self.baseline.cdf0(x))
        return out if out.shape else float(out)

    def pivot(self, x):
        """-log(1-F0(x)) for PHR, -log F0(x) for PRHR.

        Dividing the pivot of an observation by gamma gives a standard
        exponential variate, which is what every estimator consumes.
        """
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            if self.kind == PHR:
                out = -self.baseline.log_sf0(x)
            else:
                out = -self.baseline.log_cdf0(x)
        return out if out.shape else float(out)


FAMILIES = {
    "phr-exp": ModelFamily(PHR, STD_EXPONENTIAL),
    "phr-pareto": ModelFamily(PHR, PARETO_NU1),
    "prhr-beta": ModelFamily(PRHR, UNIFORM_BASE),
    "prhr-gexp": ModelFamily(PRHR, GEXP_BASE),
}


def get_family(key: str) -> ModelFamily:
    try:
        return FAMILIES[key]
    except KeyError:
        raise ValueError(
            f"unknown family {key!r}; choose one of {sorted(FAMILIES)}") from None


def family_key(fam: ModelFamily) -> str:
    for key, value in FAMILIES.items():
        if value == fam:
            return key
    raise ValueError("family is not one of the registered families")


def _check_gamma(gamma: float) -> None:
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
