"""Method-of-moments estimation via per-observation correction factors.

The pivot of a nominated observation has mean gamma*R, where R depends only
on what the data type reveals about (k, z) and on the design parameters.
Matching the first sample moment therefore gives the unbiased estimator
mean(pivot_i / R_i).  The complete and type-2 factors are expectations of
log W for the order-statistic Beta laws and share the evaluator in
:mod:`rnstat.special`; the type-1 and type-3 factors are the harmonic-sum
mixtures obtained by averaging over the hidden indicator and set size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .models import ModelFamily, PHR
from .sampler import DesignParams, RnsDataset, Visibility
from .special import e_log_beta, e_log_sq_beta, harmonic, log_beta
from .complete import EstimateReport, effective_z, pivots


@dataclass(frozen=True)
class MmCorrection:
    """One observation's moment factor with the context that produced it."""

    r_i: float
    data_type: Visibility
    family_kind: str

    def __post_init__(self):
        if not self.r_i > 0:
            raise ValueError(f"correction factor must be positive, got {self.r_i}")


def mm_correction(kind: str, visibility, design: DesignParams,
                  k: int | None = None, z: int | None = None) -> float:
    """Moment factor R for one observation.

    ``k`` must be given exactly when the visibility shows it, likewise ``z``;
    anything else is flagged as inconsistent.
    """
    visibility = Visibility.parse(visibility)
    if (k is not None) != visibility.shows_k or (z is not None) != visibility.shows_z:
        raise ValueError(
            f"{visibility.value} corrections need "
            f"{'k' if visibility.shows_k else 'no k'} and "
            f"{'z' if visibility.shows_z else 'no z'}; "
            f"got k={k!r}, z={z!r}")
    zeta_eff = design.zeta if kind == PHR else 1.0 - design.zeta
    if visibility is Visibility.COMPLETE:
        z_eff = int(z) if kind == PHR else 1 - int(z)
        value = _complete_factor(int(k), z_eff)
    elif visibility is Visibility.TYPE_I:
        value = zeta_eff * harmonic(int(k)) + (1.0 - zeta_eff) / int(k)
    elif visibility is Visibility.TYPE_II:
        z_eff = int(z) if kind == PHR else 1 - int(z)
        value = sum(r * _complete_factor(j + 1, z_eff)
                    for j, r in enumerate(design.rho) if r > 0)
    else:
        value = sum(r * (zeta_eff * harmonic(j + 1) + (1.0 - zeta_eff) / (j + 1))
                    for j, r in enumerate(design.rho) if r > 0)
    return MmCorrection(float(value), visibility, kind).r_i


def _complete_factor(k: int, z_eff: int) -> float:
    """-k * B(alpha-1, beta+1) * E[log W] for W with the order-statistic shapes."""
    alpha = (1 - z_eff) * (k - 1) + 2
    beta = z_eff * (k - 1)
    return -k * math.exp(log_beta(alpha - 1.0, beta + 1.0)) \
        * e_log_beta(alpha - 1.0, beta + 1.0)


def mm_estimate(fam: ModelFamily, ds: RnsDataset,
                design: DesignParams) -> EstimateReport:
    """Moment estimator mean(pivot/R) for any visibility level.

    Unbiased by construction; the analytic variance factor is attached for
    complete data, where the second log-moments are available in closed form.
    """
    t = pivots(fam, ds.y)
    corrections = correction_vector(fam, ds, design)
    est = float((t / corrections).mean())
    analytic_var = None
    if ds.visibility is Visibility.COMPLETE:
        z_eff = effective_z(fam, ds.z)
        second = np.array([_pivot_variance_factor(int(kk), int(zz))
                           for kk, zz in zip(ds.k, z_eff)])
        analytic_var = float((second / corrections**2).sum() / ds.m**2) * est**2
    return EstimateReport(est, "mm", analytic_mean=est, analytic_var=analytic_var)


def correction_vector(fam: ModelFamily, ds: RnsDataset,
                      design: DesignParams) -> np.ndarray:
    """Per-observation factors R_i for a dataset, as an array of length m."""
    vis = ds.visibility
    if vis is Visibility.COMPLETE:
        return np.array([mm_correction(fam.kind, vis, design, k=int(k), z=int(z))
                         for k, z in zip(ds.k, ds.z)])
    if vis is Visibility.TYPE_I:
        table = {k: mm_correction(fam.kind, vis, design, k=k)
                 for k in set(int(v) for v in ds.k)}
        return np.array([table[int(k)] for k in ds.k])
    if vis is Visibility.TYPE_II:
        by_z = {z: mm_correction(fam.kind, vis, design, z=z) for z in (0, 1)}
        return np.array([by_z[int(z)] for z in ds.z])
    # type 3: constant across observations, computed once
    return np.full(ds.m, mm_correction(fam.kind, vis, design))


def _pivot_variance_factor(k: int, z_eff: int) -> float:
    """Var[pivot]/gamma^2 given (k, z): k*B*E[log^2 W] - (k*B*E[log W])^2."""
    alpha = (1 - z_eff) * (k - 1) + 2
    beta = z_eff * (k - 1)
    kb = k * math.exp(log_beta(alpha - 1.0, beta + 1.0))
    m1 = kb * e_log_beta(alpha - 1.0, beta + 1.0)
    m2 = kb * e_log_sq_beta(alpha - 1.0, beta + 1.0)
    return m2 - m1 * m1


def mm_estimate_batch(fam: ModelFamily, design: DesignParams,
                      visibility: Visibility, t, k=None, z=None) -> np.ndarray:
    """Vectorized moment estimates over replicate rows of pivots."""
    t = np.asarray(t, dtype=float)
    if visibility is Visibility.TYPE_III:
        return t.mean(axis=-1) / mm_correction(fam.kind, visibility, design)
    if visibility is Visibility.TYPE_I:
        table = np.array([np.nan] + [
            mm_correction(fam.kind, visibility, design, k=j)
            for j in range(1, design.n_max + 1)])
        return (t / table[np.asarray(k)]).mean(axis=-1)
    if visibility is Visibility.TYPE_II:
        by_z = np.array([mm_correction(fam.kind, visibility, design, z=0),
                         mm_correction(fam.kind, visibility, design, z=1)])
        return (t / by_z[np.asarray(z)]).mean(axis=-1)
    table = np.full((2, design.n_max + 1), np.nan)
    for zz in (0, 1):
        for j in range(1, design.n_max + 1):
            table[zz, j] = mm_correction(fam.kind, visibility, design, k=j, z=zz)
    return (t / table[np.asarray(z), np.asarray(k)]).mean(axis=-1)
