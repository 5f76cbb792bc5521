"""EM estimation for the three incomplete-data visibility levels.

Type 1 hides the max/min indicator, type 2 hides the set size, type 3 hides
both.  Each E-step replaces the hidden quantities with conditional
expectations given the observed data; the M-step then solves the same
one-parameter score as the complete-data estimator, with real-valued
weights.  Unknown nomination probability (zeta) and set-size distribution
(rho) are updated from the posterior indicator means and the posterior
set-size frequencies.

For type 3 two E-step variants are available.  "joint" takes the
expectation of the bilinear z*(k-1) term under the joint posterior of
(k, z), which carries the classical likelihood-ascent guarantee; "plugin"
first computes the posterior mean set size and then evaluates the indicator
posterior at that mean.  The two coincide whenever the posteriors are
degenerate.

The engine is batched: public entry points run one dataset with a trace,
the ``*_batch`` variants run many replicates as array rows.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import VisibilityError
from .models import ModelFamily, PHR
from .sampler import RnsDataset, Visibility
from .complete import EstimateReport, pivots, solve_score_root

TYPE3_JOINT = "joint"
TYPE3_PLUGIN = "plugin"


@dataclass(frozen=True)
class EmConfig:
    """Stopping rule, known design parameters, and initial values.

    A ``*_known`` value pins that parameter; otherwise it is estimated,
    starting from ``*_init``.  ``zeta_init`` defaults to 1 under PHR and 0
    under PRHR; ``rho_init`` defaults to the uniform vector of the length of
    whichever rho vector is supplied.  Iteration stops when the change in
    gamma is below ``tol`` relative to (1 + gamma) and every estimated
    design-parameter component moves by less than ``tol``.
    """

    max_iters: int = 500
    tol: float = 1e-8
    zeta_known: float | None = None
    rho_known: tuple | None = None
    zeta_init: float | None = None
    rho_init: tuple | None = None
    type3_estep: str = TYPE3_JOINT

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        for name in ("zeta_known", "zeta_init"):
            value = getattr(self, name)
            if value is not None and not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        for name in ("rho_known", "rho_init"):
            value = getattr(self, name)
            if value is not None:
                value = tuple(float(v) for v in value)
                object.__setattr__(self, name, value)
                if any(v < 0 for v in value) or abs(sum(value) - 1.0) > 1e-12:
                    raise ValueError(f"{name} must be a probability vector")
        if self.type3_estep not in (TYPE3_JOINT, TYPE3_PLUGIN):
            raise ValueError(f"unknown type3_estep {self.type3_estep!r}")


@dataclass
class EmTrace:
    """Per-iteration record of the parameter path and the observed-data
    log likelihood evaluated at each iterate (row 0 is the initial point)."""

    gamma: list = field(default_factory=list)
    zeta: list = field(default_factory=list)
    rho: list = field(default_factory=list)
    loglik: list = field(default_factory=list)

    def append(self, gamma, zeta, rho, loglik):
        self.gamma.append(float(gamma))
        self.zeta.append(float(zeta))
        self.rho.append(tuple(float(r) for r in rho))
        self.loglik.append(float(loglik))

    def __len__(self):
        return len(self.gamma)

    def to_csv(self, path, meta: dict | None = None) -> None:
        n_rho = len(self.rho[0]) if self.rho else 0
        with open(path, "w", newline="") as fh:
            if meta:
                fh.write("# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
            writer = csv.writer(fh)
            writer.writerow(["iteration", "gamma", "zeta"]
                            + [f"rho{j + 1}" for j in range(n_rho)] + ["loglik"])
            for i in range(len(self)):
                writer.writerow([i, format(self.gamma[i], ".17g"),
                                 format(self.zeta[i], ".17g")]
                                + [format(r, ".17g") for r in self.rho[i]]
                                + [format(self.loglik[i], ".17g")])


class EmBatchResult(NamedTuple):
    gamma: np.ndarray
    zeta: np.ndarray
    rho: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray


# ---------------------------------------------------------------------------
# observed-data log likelihoods

def loglik_type1(fam: ModelFamily, gamma: float, ds: RnsDataset,
                 zeta: float) -> float:
    """Log likelihood of (y, k) pairs under nomination probability zeta."""
    if not ds.visibility.shows_k:
        raise VisibilityError("type-1 likelihood needs the set sizes")
    t = pivots(fam, ds.y)
    return float(_loglik1_arrays(fam, np.atleast_2d(t),
                                 np.atleast_2d(np.asarray(ds.k)),
                                 _logf_terms(fam, ds.y),
                                 np.atleast_1d(gamma), np.atleast_1d(zeta))[0])


def loglik_type2(fam: ModelFamily, gamma: float, ds: RnsDataset, rho) -> float:
    """Log likelihood of (y, z) pairs under set-size distribution rho."""
    if not ds.visibility.shows_z:
        raise VisibilityError("type-2 likelihood needs the max/min indicators")
    t = pivots(fam, ds.y)
    rho = np.atleast_2d(np.asarray(rho, dtype=float))
    return float(_loglik2_arrays(fam, np.atleast_2d(t),
                                 np.atleast_2d(np.asarray(ds.z)),
                                 _logf_terms(fam, ds.y),
                                 np.atleast_1d(gamma), rho)[0])


def loglik_type3(fam: ModelFamily, gamma: float, ds: RnsDataset, rho,
                 zeta: float) -> float:
    """Log likelihood of the values alone under (rho, zeta)."""
    t = pivots(fam, ds.y)
    rho = np.atleast_2d(np.asarray(rho, dtype=float))
    return float(_loglik3_arrays(fam, np.atleast_2d(t), _logf_terms(fam, ds.y),
                                 np.atleast_1d(gamma), rho,
                                 np.atleast_1d(zeta))[0])


def _logf_terms(fam, y):
    """Gamma-free parts of log f: log f0(y) + pivot; the rest is added per
    iterate as -log(gamma) - t/gamma."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    return fam.baseline.log_pdf0(y) + np.asarray(fam.pivot(y))


def _f_fbar(fam, t, gamma):
    x = t / gamma[:, None]
    with np.errstate(under="ignore"):
        q = np.exp(-x)
        p = -np.expm1(-x)
    return (p, q) if fam.kind == PHR else (q, p)


def _logf_sum(t, logf, gamma):
    return logf.sum(axis=-1) - t.shape[-1] * np.log(gamma) \
        - t.sum(axis=-1) / gamma


def _loglik1_arrays(fam, t, k, logf, gamma, zeta):
    F, Fbar = _f_fbar(fam, t, gamma)
    zc = np.asarray(zeta)[:, None]
    with np.errstate(divide="ignore"):
        mix = np.log(zc * F ** (k - 1) + (1 - zc) * Fbar ** (k - 1))
    return _logf_sum(t, logf, gamma) + np.log(k).sum(axis=-1) + mix.sum(axis=-1)


def _size_weighted(rho, F_or_Fbar, weight_power):
    """sum_j j**weight_power * rho_j * base**(j-1) over the size support."""
    n = rho.shape[-1]
    out = np.zeros_like(F_or_Fbar)
    for j in range(1, n + 1):
        out += j**weight_power * rho[..., j - 1, None] * F_or_Fbar ** (j - 1)
    return out


def _loglik2_arrays(fam, t, z, logf, gamma, rho):
    F, Fbar = _f_fbar(fam, t, gamma)
    base = np.where(z == 1, F, Fbar)
    with np.errstate(divide="ignore"):
        mix = np.log(_size_weighted(rho, base, 1))
    return _logf_sum(t, logf, gamma) + mix.sum(axis=-1)


def _loglik3_arrays(fam, t, logf, gamma, rho, zeta):
    F, Fbar = _f_fbar(fam, t, gamma)
    zc = np.asarray(zeta)[:, None]
    with np.errstate(divide="ignore"):
        mix = np.log(zc * _size_weighted(rho, F, 1)
                     + (1 - zc) * _size_weighted(rho, Fbar, 1))
    return _logf_sum(t, logf, gamma) + mix.sum(axis=-1)


# ---------------------------------------------------------------------------
# E-steps: each returns the coefficients E[z(k-1)], E[(1-z)(k-1)] plus the
# posterior summaries used to update unknown design parameters.

def _estep_type1(fam, t, k, gamma, zeta):
    F, Fbar = _f_fbar(fam, t, gamma)
    num1 = zeta[:, None] * F ** (k - 1)
    num0 = (1 - zeta[:, None]) * Fbar ** (k - 1)
    den = num1 + num0
    with np.errstate(invalid="ignore", divide="ignore"):
        zpost = np.where(den > 0, num1 / den, zeta[:, None] * np.ones_like(den))
    return zpost * (k - 1), (1 - zpost) * (k - 1), zpost, None


def _estep_type2(fam, t, z, gamma, rho):
    F, Fbar = _f_fbar(fam, t, gamma)
    base = np.where(z == 1, F, Fbar)
    n = rho.shape[-1]
    w = np.stack([j * rho[..., j - 1, None] * base ** (j - 1)
                  for j in range(1, n + 1)], axis=-1)
    den = w.sum(axis=-1)
    kpost = (w * np.arange(1, n + 1)).sum(axis=-1) / den
    pk = w / den[..., None]
    return z * (kpost - 1), (1 - z) * (kpost - 1), None, pk


def _estep_type3(fam, t, gamma, rho, zeta, style):
    F, Fbar = _f_fbar(fam, t, gamma)
    n = rho.shape[-1]
    sizes = np.arange(1, n + 1)
    w1 = np.stack([zeta[:, None] * j * rho[..., j - 1, None] * F ** (j - 1)
                   for j in sizes], axis=-1)
    w0 = np.stack([(1 - zeta[:, None]) * j * rho[..., j - 1, None]
                   * Fbar ** (j - 1) for j in sizes], axis=-1)
    den = (w1 + w0).sum(axis=-1)
    pk = (w1 + w0) / den[..., None]
    if style == TYPE3_JOINT:
        c1 = ((sizes - 1) * w1).sum(axis=-1) / den
        c0 = ((sizes - 1) * w0).sum(axis=-1) / den
        zpost = w1.sum(axis=-1) / den
    else:
        kpost = (sizes * (w1 + w0)).sum(axis=-1) / den
        a1 = zeta[:, None] * F ** (kpost - 1)
        a0 = (1 - zeta[:, None]) * Fbar ** (kpost - 1)
        with np.errstate(invalid="ignore", divide="ignore"):
            zpost = np.where(a1 + a0 > 0, a1 / (a1 + a0),
                             zeta[:, None] * np.ones_like(a1))
        c1 = zpost * (kpost - 1)
        c0 = (1 - zpost) * (kpost - 1)
    return c1, c0, zpost, pk


# ---------------------------------------------------------------------------
# engine

def _resolve_start(fam, cfg, data_type, n_sizes_hint):
    zeta_fixed = cfg.zeta_known is not None
    if zeta_fixed:
        zeta0 = float(cfg.zeta_known)
    elif cfg.zeta_init is not None:
        zeta0 = float(cfg.zeta_init)
    else:
        zeta0 = 1.0 if fam.kind == PHR else 0.0
    rho_fixed = cfg.rho_known is not None
    if rho_fixed:
        rho0 = np.asarray(cfg.rho_known, dtype=float)
    elif cfg.rho_init is not None:
        rho0 = np.asarray(cfg.rho_init, dtype=float)
    elif n_sizes_hint is not None:
        rho0 = np.full(n_sizes_hint, 1.0 / n_sizes_hint)
    elif data_type in (Visibility.TYPE_II, Visibility.TYPE_III):
        raise ValueError(
            "type-2/3 EM needs the set-size support: supply rho_known or "
            "rho_init in the EmConfig")
    else:
        rho0 = np.array([1.0])
    return zeta0, zeta_fixed, rho0, rho_fixed


def _run_em(fam, data_type, y, k, z, cfg, trace_ds=None):
    y = np.atleast_2d(np.asarray(y, dtype=float))
    R, m = y.shape
    t = pivots(fam, y)
    zeta0, zeta_fixed, rho0, rho_fixed = _resolve_start(fam, cfg, data_type, None)

    gamma = t.mean(axis=-1)
    zeta = np.full(R, zeta0)
    rho = np.broadcast_to(rho0, (R, len(rho0))).copy()
    iterations = np.zeros(R, dtype=int)
    converged = np.zeros(R, dtype=bool)

    if k is not None:
        k = np.atleast_2d(np.asarray(k))
    if z is not None:
        z = np.atleast_2d(np.asarray(z))

    trace = None
    if trace_ds is not None:
        trace = EmTrace()
        trace.append(gamma[0], zeta[0], rho[0],
                     _trace_loglik(fam, data_type, trace_ds, gamma[0],
                                   zeta[0], rho[0], cfg))

    active = np.arange(R)
    for it in range(1, cfg.max_iters + 1):
        ta = t[active]
        ga, za, ra = gamma[active], zeta[active], rho[active]
        if data_type is Visibility.TYPE_I:
            c1, c0, zpost, pk = _estep_type1(fam, ta, k[active], ga, za)
        elif data_type is Visibility.TYPE_II:
            c1, c0, zpost, pk = _estep_type2(fam, ta, z[active], ga, ra)
        else:
            c1, c0, zpost, pk = _estep_type3(fam, ta, ga, ra, za,
                                             cfg.type3_estep)

        if fam.kind == PHR:
            a, b = 1.0 + c0, c1
        else:
            a, b = 1.0 + c1, c0
        new_gamma = solve_score_root(ta, a, b)

        delta = np.abs(new_gamma - ga) / (1.0 + np.abs(ga))
        done = delta < cfg.tol
        if not zeta_fixed and zpost is not None:
            new_zeta = zpost.mean(axis=-1)
            done &= np.abs(new_zeta - za) < cfg.tol
            zeta[active] = new_zeta
        if not rho_fixed and pk is not None:
            new_rho = pk.mean(axis=-2)
            done &= np.abs(new_rho - ra).max(axis=-1) < cfg.tol
            rho[active] = new_rho
        gamma[active] = new_gamma
        iterations[active] = it

        if trace is not None:
            trace.append(gamma[0], zeta[0], rho[0],
                         _trace_loglik(fam, data_type, trace_ds, gamma[0],
                                       zeta[0], rho[0], cfg))

        converged[active[done]] = True
        active = active[~done]
        if active.size == 0:
            break

    result = EmBatchResult(gamma, zeta, rho, iterations, converged)
    return (result, trace) if trace is not None else result


def _trace_loglik(fam, data_type, ds, gamma, zeta, rho, cfg):
    if data_type is Visibility.TYPE_I:
        return loglik_type1(fam, gamma, ds, zeta)
    if data_type is Visibility.TYPE_II:
        return loglik_type2(fam, gamma, ds, rho)
    return loglik_type3(fam, gamma, ds, rho, zeta)


def _report(method, result, idx=0):
    return EstimateReport(
        estimate=float(result.gamma[idx]),
        method=method,
        iterations=int(result.iterations[idx]),
        converged=bool(result.converged[idx]),
    )


# ---------------------------------------------------------------------------
# public entry points

def em_type1(fam: ModelFamily, ds: RnsDataset,
             cfg: EmConfig | None = None) -> tuple[EstimateReport, EmTrace]:
    """ML fit for (y, k) data; the extreme indicator is integrated out."""
    cfg = cfg or EmConfig()
    if not ds.visibility.shows_k:
        raise VisibilityError("type-1 EM needs the set sizes: dataset is "
                              f"{ds.visibility.value}")
    result, trace = _run_em(fam, Visibility.TYPE_I, ds.y, ds.k, None, cfg,
                            trace_ds=ds)
    return _report("em_type1", result), trace


def em_type2(fam: ModelFamily, ds: RnsDataset,
             cfg: EmConfig | None = None) -> tuple[EstimateReport, EmTrace]:
    """ML fit for (y, z) data; the set size is integrated out over rho."""
    cfg = cfg or EmConfig()
    if not ds.visibility.shows_z:
        raise VisibilityError("type-2 EM needs the max/min indicators: dataset "
                              f"is {ds.visibility.value}")
    result, trace = _run_em(fam, Visibility.TYPE_II, ds.y, None, ds.z, cfg,
                            trace_ds=ds)
    return _report("em_type2", result), trace


def em_type3(fam: ModelFamily, ds: RnsDataset,
             cfg: EmConfig | None = None) -> tuple[EstimateReport, EmTrace]:
    """ML fit from the measured values alone."""
    cfg = cfg or EmConfig()
    result, trace = _run_em(fam, Visibility.TYPE_III, ds.y, None, None, cfg,
                            trace_ds=ds)
    return _report("em_type3", result), trace


def em_type1_batch(fam, y, k, cfg: EmConfig) -> EmBatchResult:
    return _run_em(fam, Visibility.TYPE_I, y, k, None, cfg)


def em_type2_batch(fam, y, z, cfg: EmConfig) -> EmBatchResult:
    return _run_em(fam, Visibility.TYPE_II, y, None, z, cfg)


def em_type3_batch(fam, y, cfg: EmConfig) -> EmBatchResult:
    return _run_em(fam, Visibility.TYPE_III, y, None, None, cfg)
