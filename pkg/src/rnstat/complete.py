"""Estimators for complete nomination samples, plus the SRS baseline.

Internally everything is expressed in a canonical form: the pivot
t_i = -log(1-F0(y_i)) (PHR) or -log F0(y_i) (PRHR), and an effective
indicator that is 1 for the extreme whose pivot is a sum of k exponential
spacings (the maximum under PHR, the minimum under PRHR).  In that form the
likelihood score is

    M*gamma - sum(a_i * t_i) + sum(b_i * t_i * q_i / (1 - q_i)) = 0,

with q_i = exp(-t_i/gamma), a_i = (1-z_i)(k_i-1) + 1 and b_i = z_i(k_i-1).
The score is strictly increasing in gamma, so a bracketed bisection on
log gamma followed by one Newton step pins the root.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

from .errors import ConvergenceError, VisibilityError
from .models import ModelFamily, PHR
from .sampler import RnsDataset, Visibility
from .special import e_log_beta, e_log_sq_beta, harmonic, log_beta

BISECT_STEPS = 60
_BRACKET_SPAN = 1e4


@dataclass
class EstimateReport:
    """A point estimate with its provenance and convergence metadata.

    ``analytic_mean``/``analytic_var`` are the closed-form moment factors
    evaluated at the point estimate (mean_factor*estimate and
    var_factor*estimate**2); they are None where no closed form exists.
    """

    estimate: float
    method: str
    iterations: int = 0
    converged: bool = True
    analytic_mean: float | None = None
    analytic_var: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def alpha_beta(k, z):
    """Order-statistic shape pair: alpha = (1-z)(k-1)+2, beta = z(k-1)."""
    k = np.asarray(k)
    z = np.asarray(z)
    return (1 - z) * (k - 1) + 2, z * (k - 1)


def effective_z(fam: ModelFamily, z):
    """1 for the information-rich extreme: the max under PHR, min under PRHR."""
    z = np.asarray(z)
    return z if fam.kind == PHR else 1 - z


def pivots(fam: ModelFamily, values) -> np.ndarray:
    t = np.asarray(fam.pivot(values), dtype=float)
    if t.size == 0:
        raise ValueError("need at least one observation")
    if not np.all(np.isfinite(t)) or np.any(t <= 0):
        raise ValueError(
            "an observation sits on the support boundary; its log transform diverges")
    return t


def _score(gamma, t, a, b):
    x = t / gamma[..., None]
    with np.errstate(over="ignore", under="ignore"):
        q = np.exp(-x)
        one_minus_q = -np.expm1(-x)
        corr = np.where(b > 0, b * t * q / one_minus_q, 0.0)
    return t.shape[-1] * gamma - (a * t).sum(axis=-1) + corr.sum(axis=-1)


def _score_derivative(gamma, t, a, b):
    x = t / gamma[..., None]
    with np.errstate(over="ignore", under="ignore"):
        q = np.exp(-x)
        one_minus_q = -np.expm1(-x)
        term = np.where(b > 0, b * t * t * q / one_minus_q**2, 0.0)
    return t.shape[-1] + term.sum(axis=-1) / gamma**2


def solve_score_root(t, a, b):
    """Vectorized root of the canonical score over the trailing axis.

    ``t`` has shape (..., m); ``a`` and ``b`` broadcast against it.  The
    bracket spans four decades either side of the design-blind estimate
    mean(t).  Returns an array of gamma roots with shape (...).
    """
    t = np.asarray(t, dtype=float)
    a = np.broadcast_to(np.asarray(a, dtype=float), t.shape)
    b = np.broadcast_to(np.asarray(b, dtype=float), t.shape)
    if not np.any(b > 0):
        return (a * t).sum(axis=-1) / t.shape[-1]
    center = t.mean(axis=-1)
    lo = np.log(center / _BRACKET_SPAN)
    hi = np.log(center * _BRACKET_SPAN)
    g_lo = _score(np.exp(lo), t, a, b)
    g_hi = _score(np.exp(hi), t, a, b)
    if np.any(g_lo >= 0) or np.any(g_hi <= 0):
        bad = int(np.flatnonzero((g_lo >= 0) | (g_hi <= 0)).ravel()[0])
        raise ConvergenceError(
            "score has no sign change over the bracket "
            f"[{float(np.exp(lo).ravel()[bad]):.3e}, "
            f"{float(np.exp(hi).ravel()[bad]):.3e}] "
            f"(score ends: {float(g_lo.ravel()[bad]):.3e}, "
            f"{float(g_hi.ravel()[bad]):.3e})")
    for _ in range(BISECT_STEPS):
        mid = 0.5 * (lo + hi)
        positive = _score(np.exp(mid), t, a, b) > 0
        hi = np.where(positive, mid, hi)
        lo = np.where(positive, lo, mid)
    gamma = np.exp(0.5 * (lo + hi))
    polished = gamma - _score(gamma, t, a, b) / _score_derivative(gamma, t, a, b)
    keep = np.isfinite(polished) & (polished > 0)
    return np.where(keep, polished, gamma)


def srs_ml(fam: ModelFamily, xs) -> EstimateReport:
    """Mean pivot of a simple random sample; unbiased with variance gamma^2/m."""
    t = pivots(fam, xs)
    est = float(t.mean())
    return EstimateReport(est, "srs_ml",
                          analytic_mean=est, analytic_var=est**2 / t.size)


def complete_ml(fam: ModelFamily, ds: RnsDataset) -> EstimateReport:
    """Numeric maximum-likelihood root for a complete nomination sample."""
    t, k, z_eff = _complete_arrays(fam, ds)
    est = complete_ml_batch(t[None, :], k[None, :], z_eff[None, :])
    return EstimateReport(float(est[0]), "complete_ml",
                          iterations=BISECT_STEPS + 1)


def complete_ml_batch(t, k, z_eff) -> np.ndarray:
    a = (1 - z_eff) * (k - 1) + 1
    b = z_eff * (k - 1)
    return solve_score_root(t, a, b)


def mins_closed_form(fam: ModelFamily, ds: RnsDataset) -> EstimateReport:
    """Closed form mean(k*t)/1 for all-minima PHR (all-maxima PRHR) samples.

    Unbiased, with the same variance as the SRS estimator.
    """
    t, k, z_eff = _complete_arrays(fam, ds)
    _require_all(z_eff, 0, fam)
    est = float(mins_closed_form_batch(t[None, :], k[None, :])[0])
    return EstimateReport(est, "mins_closed_form",
                          analytic_mean=est, analytic_var=est**2 / t.size)


def mins_closed_form_batch(t, k) -> np.ndarray:
    return (np.asarray(k) * np.asarray(t)).mean(axis=-1)


def mans_mml(fam: ModelFamily, ds: RnsDataset) -> EstimateReport:
    """Modified ML for all-maxima PHR (all-minima PRHR) samples.

    sum(t) over the summed harmonic weights; unbiased, with variance factor
    sum_i sum_{j<=k_i} j^-2 / (sum_i sum_{j<=k_i} j^-1)^2.
    """
    t, k, z_eff = _complete_arrays(fam, ds)
    _require_all(z_eff, 1, fam)
    h1 = sum(harmonic(int(kk)) for kk in k)
    h2 = sum(harmonic(int(kk), 2) for kk in k)
    est = float(t.sum() / h1)
    return EstimateReport(est, "mans_mml",
                          analytic_mean=est, analytic_var=h2 / h1**2 * est**2)


def mans_mml_batch(t, k) -> np.ndarray:
    k = np.asarray(k)
    h1 = harmonic_table(int(k.max()))[k]
    return np.asarray(t).sum(axis=-1) / h1.sum(axis=-1)


def harmonic_table(k_max: int, power: int = 1) -> np.ndarray:
    """Array whose k-th entry is sum_{j<=k} 1/j**power (entry 0 is 0)."""
    recip = np.arange(k_max + 1, dtype=float)
    with np.errstate(divide="ignore"):
        recip = np.where(recip > 0, recip**-float(power), 0.0)
    return np.cumsum(recip)


def general_mml(fam: ModelFamily, ds: RnsDataset) -> EstimateReport:
    """Modified ML for mixed samples: the intractable score term is replaced
    by its expectation, leaving a ratio of harmonic-weighted sums.

    Falls back to :func:`mins_closed_form` when no observation is the
    information-rich extreme.
    """
    t, k, z_eff = _complete_arrays(fam, ds)
    if not np.any(z_eff == 1):
        return mins_closed_form(fam, ds)
    est = float(general_mml_batch(t[None, :], k[None, :], z_eff[None, :])[0])
    mean_f, var_f = _mml_factors(k, z_eff)
    return EstimateReport(est, "general_mml",
                          analytic_mean=mean_f * est, analytic_var=var_f * est**2)


def general_mml_batch(t, k, z_eff) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    k = np.asarray(k)
    z_eff = np.asarray(z_eff)
    numer = (((1 - z_eff) * (k - 1) + 1) * t).sum(axis=-1)
    table = _e_term_table(int(k.max()))
    denom = t.shape[-1] + np.where(z_eff == 1, (k - 1) * table[k], 0.0).sum(axis=-1)
    return numer / denom


def unbiased_mml(fam: ModelFamily, ds: RnsDataset) -> EstimateReport:
    """General MML rescaled by its exact mean factor so it is unbiased."""
    t, k, z_eff = _complete_arrays(fam, ds)
    if not np.any(z_eff == 1):
        return mins_closed_form(fam, ds)
    base = general_mml(fam, ds)
    mean_f, var_f = _mml_factors(k, z_eff)
    est = base.estimate / mean_f
    return EstimateReport(est, "unbiased_mml",
                          analytic_mean=est, analytic_var=var_f / mean_f**2 * est**2)


def analytic_moments(design_pairs, kind: str):
    """Exact (mean, variance) factors of the closed-form estimator.

    ``design_pairs`` is a sequence of (k, z); the factors depend only on the
    design, not the data.  Returns (E[estimate]/gamma, Var[estimate]/gamma^2)
    for the estimator the dispatcher would select: the closed form when every
    observation is the low-information extreme, the general MML otherwise.
    """
    pairs = [(int(k), int(z)) for k, z in design_pairs]
    if not pairs:
        raise ValueError("design must be nonempty")
    k = np.array([p[0] for p in pairs])
    z = np.array([p[1] for p in pairs])
    z_eff = z if kind == PHR else 1 - z
    if not np.any(z_eff == 1):
        return 1.0, 1.0 / len(pairs)
    return _mml_factors(k, z_eff)


def select_closed_form(fam: ModelFamily, ds: RnsDataset) -> EstimateReport:
    """Dispatch on the z pattern: pure designs get their dedicated closed
    forms, mixed samples the general MML."""
    _, _, z_eff = _complete_arrays(fam, ds)
    if np.all(z_eff == 0):
        return mins_closed_form(fam, ds)
    if np.all(z_eff == 1):
        return mans_mml(fam, ds)
    return general_mml(fam, ds)


def _mml_factors(k, z_eff):
    m = len(k)
    alpha = (1 - z_eff) * (k - 1) + 2
    beta = z_eff * (k - 1)
    weight = alpha - 1
    kb = np.array([kk * math.exp(log_beta(a - 1, b + 1))
                   for kk, a, b in zip(k, alpha, beta)])
    mean1 = np.array([e_log_beta(a - 1, b + 1) for a, b in zip(alpha, beta)])
    mean2 = np.array([e_log_sq_beta(a - 1, b + 1) for a, b in zip(alpha, beta)])
    table = _e_term_table(int(np.max(k)))
    denom = m + np.where(z_eff == 1, (k - 1) * table[np.asarray(k)], 0.0).sum()
    mean_factor = -(weight * kb * mean1).sum() / denom
    var_per_obs = kb * mean2 - (kb * mean1) ** 2
    var_factor = (weight**2 * var_per_obs).sum() / denom**2
    return float(mean_factor), float(var_factor)


def _e_term_table(k_max: int) -> np.ndarray:
    """Expected score-correction term for the rich extreme, indexed by k.

    Entry k is -k*B(2, k-1)*E[log U] with U ~ Beta(2, k-1); index 0 and k=1
    (no correction possible) are zero.
    """
    table = np.zeros(k_max + 1)
    for kk in range(2, k_max + 1):
        table[kk] = -kk * math.exp(log_beta(2.0, kk - 1.0)) * e_log_beta(2.0, kk - 1.0)
    return table


def _complete_arrays(fam: ModelFamily, ds: RnsDataset):
    if ds.visibility is not Visibility.COMPLETE:
        raise VisibilityError(
            f"complete-data estimators need (y, k, z); dataset is "
            f"{ds.visibility.value}")
    return pivots(fam, ds.y), np.asarray(ds.k), effective_z(fam, ds.z)


def _require_all(z_eff, value: int, fam: ModelFamily) -> None:
    bad = np.flatnonzero(z_eff != value)
    if bad.size:
        want = ("minima" if value == 0 else "maxima") if fam.kind == PHR else \
               ("maxima" if value == 0 else "minima")
        raise ValueError(
            f"estimator requires all nominated units to be {want} under "
            f"{fam.kind}; offending observation indices: {bad.tolist()}")
