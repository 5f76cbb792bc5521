"""Replicate farms comparing nomination designs against the SRS baseline.

For every grid cell (gamma x zeta x rho) the harness draws paired samples of
equal measured size m, applies the requested estimator to the nomination arm
and the ML baseline to the SRS arm, and reports the MSE ratio

    rp = MSE(nomination estimator) / MSE(SRS estimator),

with values below one favoring the nomination design.  The two arms share a
per-replicate seed, so their measurement uniforms coincide stream-for-stream
(common random numbers); with rho = (1,) the arms are identical and rp is
exactly one.

Replicates are processed in fixed-size chunks whose seeds derive from
(master_seed, cell_index, chunk_index); results are folded in chunk order,
so the output is bit-identical for any worker count.
"""

from __future__ import annotations

import itertools
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from .models import get_family
from .sampler import DesignParams, Visibility, draw_complete_batch, srs_design
from .complete import (
    complete_ml_batch,
    effective_z,
    general_mml_batch,
    mans_mml_batch,
    mins_closed_form_batch,
    pivots,
)
from .em import EmConfig, em_type1_batch, em_type2_batch, em_type3_batch
from .mm import mm_estimate_batch
from . import csvio

CHUNK_SIZE = 4096

PRECISION_HEADER = ["design", "gamma", "zeta", "rho", "estimator", "mse_rns",
                    "mse_srs", "rp", "rp_se", "replicates", "seed"]

# estimator key -> (required visibility, or None when any level is accepted)
ESTIMATOR_VISIBILITY = {
    "complete_ml": Visibility.COMPLETE,
    "mins_closed_form": Visibility.COMPLETE,
    "mans_mml": Visibility.COMPLETE,
    "general_mml": Visibility.COMPLETE,
    "unbiased_mml": Visibility.COMPLETE,
    "mm": None,
    "em_type1": Visibility.TYPE_I,
    "em_type2": Visibility.TYPE_II,
    "em_type3": Visibility.TYPE_III,
}


@dataclass(frozen=True)
class EmPolicy:
    """How the EM estimators treat the design parameters inside a farm.

    "Known" parameters take each cell's true values; unknown ones start from
    the given initials (family default for zeta, uniform over the cell's rho
    support for rho).
    """

    zeta_known: bool = True
    rho_known: bool = True
    zeta_init: float | None = None
    rho_init: tuple | None = None
    max_iters: int = 500
    tol: float = 1e-8
    type3_estep: str = "joint"

    def config_for(self, design: DesignParams) -> EmConfig:
        rho_init = self.rho_init
        if rho_init is None and not self.rho_known:
            rho_init = (1.0 / design.n_max,) * design.n_max
        return EmConfig(
            max_iters=self.max_iters,
            tol=self.tol,
            zeta_known=design.zeta if self.zeta_known else None,
            rho_known=design.rho if self.rho_known else None,
            zeta_init=self.zeta_init,
            rho_init=rho_init,
            type3_estep=self.type3_estep,
        )


@dataclass(frozen=True)
class ExperimentSpec:
    """One relative-precision experiment: an estimator over a design grid."""

    family: str
    estimator: str
    data_type: str
    gammas: tuple
    zetas: tuple
    rhos: tuple
    m: int
    replicates: int
    master_seed: int
    label: str = ""
    em: EmPolicy = field(default_factory=EmPolicy)

    def __post_init__(self):
        get_family(self.family)
        object.__setattr__(self, "data_type", Visibility.parse(self.data_type).value)
        object.__setattr__(self, "gammas", tuple(float(g) for g in self.gammas))
        object.__setattr__(self, "zetas", tuple(float(z) for z in self.zetas))
        object.__setattr__(self, "rhos",
                           tuple(tuple(float(r) for r in rho) for rho in self.rhos))
        if not (self.gammas and self.zetas and self.rhos):
            raise ValueError("gammas, zetas, and rhos must all be nonempty")
        if any(g <= 0 for g in self.gammas):
            raise ValueError("gamma grid must be positive")
        if self.replicates < 1:
            raise ValueError("replicates must be positive")
        if self.replicates < 1000:
            warnings.warn("fewer than 1000 replicates: treat the ratios as "
                          "smoke output, not reportable numbers", stacklevel=2)
        validate_estimator(self.estimator, self.data_type)

    def cells(self):
        return itertools.product(self.gammas, self.zetas, self.rhos)


def validate_estimator(estimator: str, data_type) -> None:
    """Reject estimator/visibility mismatches before anything is sampled."""
    if estimator not in ESTIMATOR_VISIBILITY:
        raise ValueError(f"unknown estimator {estimator!r}; choose from "
                         f"{sorted(ESTIMATOR_VISIBILITY)}")
    required = ESTIMATOR_VISIBILITY[estimator]
    actual = Visibility.parse(data_type)
    if required is not None and actual is not required:
        raise ValueError(
            f"estimator {estimator!r} needs {required.value} data, "
            f"but the experiment declares {actual.value}")


@dataclass
class PrecisionRow:
    design: str
    gamma: float
    zeta: float
    rho: tuple
    estimator: str
    mse_rns: float
    mse_srs: float
    rp: float
    rp_se: float
    replicates: int
    seed: int

    def as_csv(self) -> list:
        return [self.design, format(self.gamma, ".17g"), format(self.zeta, ".17g"),
                describe_rho(self.rho), self.estimator,
                format(self.mse_rns, ".17g"), format(self.mse_srs, ".17g"),
                format(self.rp, ".17g"), format(self.rp_se, ".17g"),
                self.replicates, self.seed]


@dataclass
class PrecisionTable:
    rows: list
    meta: dict = field(default_factory=dict)

    def to_csv(self, path, extra_meta: dict | None = None) -> None:
        meta = dict(self.meta)
        meta.update(extra_meta or {})
        csvio.write_rows(path, PRECISION_HEADER,
                         [r.as_csv() for r in self.rows], meta)

    def __len__(self):
        return len(self.rows)


def describe_rho(rho) -> str:
    values = [float(r) for r in rho]
    if max(values) == 1.0:
        return f"K={values.index(1.0) + 1}"
    return "(" + ";".join(format(v, "g") for v in values) + ")"


def fixed_kp_design(k: int, p: float, m: int) -> DesignParams:
    """Point-mass design: sets of fixed size k, maxima with probability p."""
    if k < 1:
        raise ValueError(f"set size must be >= 1, got {k}")
    return DesignParams(rho=(0.0,) * (k - 1) + (1.0,), zeta=p, m=m)


def paper_rho_presets() -> list:
    """The four size distributions of the simulation study plus the case
    study's triple."""
    return [
        (0.4, 0.3, 0.2, 0.1),
        (0.1, 0.2, 0.3, 0.4),
        (0.2, 0.0, 0.0, 0.8),
        (0.0, 0.0, 0.0, 1.0),
        (0.4, 0.3, 0.2, 0.1),
        (0.1, 0.2, 0.3, 0.4),
        (0.0, 0.0, 0.0, 1.0),
    ]


def chunk_plan(replicates: int, chunk_size: int = CHUNK_SIZE):
    """Fixed chunking of the replicate range, independent of worker count."""
    return [(index, min(chunk_size, replicates - index * chunk_size))
            for index in range(math.ceil(replicates / chunk_size))]


def _chunk_worker(args):
    (family, estimator, data_type, gamma, zeta, rho, m, em_policy_dict,
     master_seed, cell_index, chunk_index, size) = args
    fam = get_family(family)
    design = DesignParams(rho=rho, zeta=zeta, m=m)
    policy = EmPolicy(**em_policy_dict)
    seed = (master_seed, cell_index, chunk_index)

    y, k, z = draw_complete_batch(fam, gamma, design, seed, size)
    t = pivots(fam, y)
    z_eff = effective_z(fam, z)
    nonconverged = 0
    if estimator == "complete_ml":
        est = complete_ml_batch(t, k, z_eff)
    elif estimator == "mins_closed_form":
        est = mins_closed_form_batch(t, k)
    elif estimator == "mans_mml":
        est = mans_mml_batch(t, k)
    elif estimator in ("general_mml", "unbiased_mml"):
        est = general_mml_batch(t, k, z_eff)
    elif estimator == "mm":
        est = mm_estimate_batch(fam, design, Visibility.parse(data_type),
                                t, k=k, z=z)
    else:
        cfg = policy.config_for(design)
        if estimator == "em_type1":
            result = em_type1_batch(fam, y, k, cfg)
        elif estimator == "em_type2":
            result = em_type2_batch(fam, y, z, cfg)
        else:
            result = em_type3_batch(fam, y, cfg)
        est = result.gamma
        nonconverged = int((~result.converged).sum())

    y_srs, _, _ = draw_complete_batch(fam, gamma, srs_design(m), seed, size)
    est_srs = pivots(fam, y_srs).mean(axis=-1)

    a = (est - gamma) ** 2
    b = (est_srs - gamma) ** 2
    return (cell_index, chunk_index, float(a.sum()), float(b.sum()),
            float((a * a).sum()), float((b * b).sum()), float((a * b).sum()),
            nonconverged)


_PURE_EXTREME_ZETA = {"mins_closed_form": 0.0, "mans_mml": 1.0}


def run_experiment(spec: ExperimentSpec, threads: int = 1) -> PrecisionTable:
    """Run the full grid and fold the chunk sums into the precision table."""
    pure = _PURE_EXTREME_ZETA.get(spec.estimator)
    if pure is not None:
        want = pure if get_family(spec.family).kind == "phr" else 1.0 - pure
        off = [z for z in spec.zetas if z != want]
        if off:
            raise ValueError(
                f"{spec.estimator} needs every nominee to be the same extreme: "
                f"zeta must be {want} for {spec.family}, grid has {off}")
    cells = list(spec.cells())
    plan = chunk_plan(spec.replicates)
    tasks = []
    for cell_index, (gamma, zeta, rho) in enumerate(cells):
        for chunk_index, size in plan:
            tasks.append((spec.family, spec.estimator, spec.data_type, gamma,
                          zeta, rho, spec.m, asdict(spec.em), spec.master_seed,
                          cell_index, chunk_index, size))

    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_chunk_worker, tasks, chunksize=1))
    else:
        results = [_chunk_worker(task) for task in tasks]

    by_cell = {}
    for out in sorted(results, key=lambda r: (r[0], r[1])):
        acc = by_cell.setdefault(out[0], [0.0, 0.0, 0.0, 0.0, 0.0, 0])
        for i in range(5):
            acc[i] += out[2 + i]
        acc[5] += out[7]

    rows = []
    total_nonconverged = 0
    n = spec.replicates
    for cell_index, (gamma, zeta, rho) in enumerate(cells):
        sa, sb, saa, sbb, sab, bad = by_cell[cell_index]
        mse_rns, mse_srs = sa / n, sb / n
        rp = mse_rns / mse_srs
        rows.append(PrecisionRow(
            design=f"{spec.family}/{spec.data_type}/{describe_rho(rho)}"
                   + (f"/{spec.label}" if spec.label else ""),
            gamma=gamma, zeta=zeta, rho=rho, estimator=spec.estimator,
            mse_rns=mse_rns, mse_srs=mse_srs, rp=rp,
            rp_se=_ratio_se(n, sa, sb, saa, sbb, sab),
            replicates=n, seed=spec.master_seed))
        total_nonconverged += bad

    meta = {
        "seed": spec.master_seed,
        "chunk_size": CHUNK_SIZE,
        "pairing": "common-random-numbers",
        "em_nonconverged": total_nonconverged,
    }
    return PrecisionTable(rows, meta)


def _ratio_se(n, sa, sb, saa, sbb, sab):
    """Delta-method standard error of the paired MSE ratio."""
    ma, mb = sa / n, sb / n
    va = saa / n - ma * ma
    vb = sbb / n - mb * mb
    cab = sab / n - ma * mb
    var = (va / ma**2 + vb / mb**2 - 2 * cab / (ma * mb)) * (ma / mb) ** 2 / n
    return math.sqrt(max(var, 0.0))
