"""Randomized nomination sampling: designs, datasets, and draw routines.

A design draws m sets whose sizes follow the probability vector rho; from
each set the maximum is measured with probability zeta, otherwise the
minimum.  Datasets carry a visibility level that controls which of the
(y, k, z) fields an estimator may read:

* complete -- (y, k, z)
* type1    -- (y, k)
* type2    -- (y, z)
* type3    -- y only

Hidden fields are retained internally so a dataset can be projected further
down the visibility order, but reading them raises ``VisibilityError``.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import ndtr

from .errors import VisibilityError
from .models import ModelFamily

_U_EPS = 2.0 ** -53  # uniforms clipped away from {0, 1} so pivots stay finite

ERSS = "erss"
MRSS = "mrss"


class Visibility(enum.Enum):
    COMPLETE = "complete"
    TYPE_I = "type1"
    TYPE_II = "type2"
    TYPE_III = "type3"

    @property
    def shows_k(self) -> bool:
        return self in (Visibility.COMPLETE, Visibility.TYPE_I)

    @property
    def shows_z(self) -> bool:
        return self in (Visibility.COMPLETE, Visibility.TYPE_II)

    @classmethod
    def parse(cls, value) -> "Visibility":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value))
        except ValueError:
            raise ValueError(
                f"unknown visibility {value!r}; choose from "
                f"{[v.value for v in cls]}") from None


@dataclass(frozen=True)
class DesignParams:
    """Set-size distribution, nomination probability, and sample size.

    ``rho[j-1]`` is the probability of a set of size j; the vector is the
    design's finite truncation of the size distribution.  ``fixed_pattern``
    replaces the random (k, z) draws with the deterministic extreme-ranked
    patterns: "erss" alternates max/min at a fixed set size, "mrss"
    additionally uses k_i = i and requires an even m.
    """

    rho: tuple
    zeta: float
    m: int
    fixed_pattern: str | None = None

    def __post_init__(self):
        rho = tuple(float(r) for r in self.rho)
        object.__setattr__(self, "rho", rho)
        if not rho or any(r < 0 for r in rho):
            raise ValueError("rho must be a nonempty vector of probabilities")
        if abs(sum(rho) - 1.0) > 1e-12:
            raise ValueError(f"rho must sum to 1, got {sum(rho)!r}")
        if not 0.0 <= self.zeta <= 1.0:
            raise ValueError(f"zeta must lie in [0, 1], got {self.zeta}")
        if self.m < 1:
            raise ValueError(f"m must be a positive integer, got {self.m}")
        if self.fixed_pattern not in (None, ERSS, MRSS):
            raise ValueError(f"unknown fixed_pattern {self.fixed_pattern!r}")
        if self.fixed_pattern == MRSS and self.m % 2:
            raise ValueError("the mrss pattern requires an even m")
        if self.fixed_pattern == ERSS and max(rho) != 1.0:
            raise ValueError("the erss pattern requires a point-mass rho")

    @property
    def n_max(self) -> int:
        return len(self.rho)

    @property
    def max_set_size(self) -> int:
        return self.m if self.fixed_pattern == MRSS else self.n_max


def srs_design(m: int) -> DesignParams:
    """The size-1 design; nomination reduces to simple random sampling."""
    return DesignParams(rho=(1.0,), zeta=1.0, m=m)


@dataclass(frozen=True)
class RnsObservation:
    """One measured triplet: value, set size, and max/min indicator."""

    y: float
    k: int
    z: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"set size must be >= 1, got {self.k}")
        if self.z not in (0, 1):
            raise ValueError(f"z must be 0 or 1, got {self.z}")

    @property
    def rank(self) -> int:
        return self.z * self.k + (1 - self.z)


class RnsDataset:
    """A sample of nominated observations at a declared visibility."""

    def __init__(self, y, k, z, visibility: Visibility = Visibility.COMPLETE):
        y = np.array(y, dtype=float)
        k = np.array(k, dtype=np.int64)
        z = np.array(z, dtype=np.int64)
        if not (y.ndim == k.ndim == z.ndim == 1 and len(y) == len(k) == len(z)):
            raise ValueError("y, k, z must be 1-d arrays of equal length")
        if np.any(k < 1) or np.any((z != 0) & (z != 1)):
            raise ValueError("set sizes must be >= 1 and z must be binary")
        for arr in (y, k, z):
            arr.flags.writeable = False
        self._y, self._k, self._z = y, k, z
        self.visibility = Visibility.parse(visibility)

    @property
    def m(self) -> int:
        return len(self._y)

    @property
    def y(self) -> np.ndarray:
        return self._y

    @property
    def k(self) -> np.ndarray:
        if not self.visibility.shows_k:
            raise VisibilityError(
                f"set sizes are hidden in {self.visibility.value} data")
        return self._k

    @property
    def z(self) -> np.ndarray:
        if not self.visibility.shows_z:
            raise VisibilityError(
                f"max/min indicators are hidden in {self.visibility.value} data")
        return self._z

    @property
    def observations(self) -> list[RnsObservation]:
        if self.visibility is not Visibility.COMPLETE:
            raise VisibilityError("triplets are only available on complete data")
        return [RnsObservation(float(y), int(k), int(z))
                for y, k, z in zip(self._y, self._k, self._z)]

    def project(self, target) -> "RnsDataset":
        """Reduce visibility; information can only be hidden, never restored."""
        target = Visibility.parse(target)
        ok_k = self.visibility.shows_k or not target.shows_k
        ok_z = self.visibility.shows_z or not target.shows_z
        if not (ok_k and ok_z):
            raise VisibilityError(
                f"cannot project {self.visibility.value} data to "
                f"{target.value}: hidden fields are not recoverable")
        return RnsDataset(self._y, self._k, self._z, target)

    def __repr__(self):
        return f"RnsDataset(m={self.m}, visibility={self.visibility.value!r})"


def _streams(seed, n: int) -> list[np.random.Generator]:
    ss = np.random.SeedSequence(seed)
    return [np.random.default_rng(child) for child in ss.spawn(n)]


def _draw_k_z(d_rng, design: DesignParams, nreps: int):
    """Set sizes and extreme indicators for ``nreps`` samples of size m.

    Random designs consume one uniform per observation for k and one for z,
    in that order, so arms sharing a seed stay coupled across designs.
    """
    m = design.m
    if design.fixed_pattern is not None:
        z_row = np.tile([1, 0], m)[:m].astype(np.int64)
        if design.fixed_pattern == ERSS:
            k_row = np.full(m, design.rho.index(1.0) + 1, dtype=np.int64)
        else:
            k_row = np.arange(1, m + 1, dtype=np.int64)
        return (np.broadcast_to(k_row, (nreps, m)).copy(),
                np.broadcast_to(z_row, (nreps, m)).copy())
    u_k = d_rng.random((nreps, m))
    u_z = d_rng.random((nreps, m))
    cum = np.cumsum(design.rho)
    k = np.searchsorted(cum, u_k, side="right").astype(np.int64) + 1
    k = np.minimum(k, design.n_max)
    z = (u_z < design.zeta).astype(np.int64)
    return k, z


def draw_complete_batch(fam: ModelFamily, gamma: float, design: DesignParams,
                        seed, nreps: int):
    """Arrays (y, k, z) of shape (nreps, m), one row per independent sample.

    Each observation spends a single uniform on the measured extreme (the
    max of k uniforms is u**(1/k), the min is 1-(1-u)**(1/k)), so two arms
    drawn from the same seed share their measurement stream uniform by
    uniform regardless of the designs; with rho = (1,) both arms coincide
    exactly.
    """
    d_rng, x_rng = _streams(seed, 2)
    k, z = _draw_k_z(d_rng, design, nreps)
    u = np.clip(x_rng.random((nreps, design.m)), _U_EPS, 1.0 - _U_EPS)
    with np.errstate(divide="ignore"):
        u_max = np.exp(np.log(u) / k)
        u_min = -np.expm1(np.log1p(-u) / k)
    y = fam.quantile(np.where(z == 1, u_max, u_min), gamma)
    return y, k, z


def draw_complete(fam: ModelFamily, gamma: float, design: DesignParams,
                  seed) -> RnsDataset:
    """One complete-data sample drawn under perfect ranking."""
    y, k, z = draw_complete_batch(fam, gamma, design, seed, 1)
    return RnsDataset(y[0], k[0], z[0])


def draw_complete_imperfect(fam: ModelFamily, gamma: float, design: DesignParams,
                            copula_rho: float, seed) -> RnsDataset:
    """Complete-data sample where ranking uses a noisy concomitant.

    Within each set the study value and the concomitant are linked by a
    Gaussian copula with correlation ``copula_rho`` (Kendall tau equals
    (2/pi)*arcsin(copula_rho)); the nominee is the unit whose concomitant is
    extreme, and y records that unit's study value.  As copula_rho
    approaches 1 the nominee indices match perfect ranking.
    """
    if not -1.0 < copula_rho < 1.0:
        raise ValueError(f"copula_rho must lie in (-1, 1), got {copula_rho}")
    d_rng, x_rng = _streams(seed, 2)
    k, z = _draw_k_z(d_rng, design, 1)
    k, z = k[0], z[0]
    kmax = design.max_set_size
    shape = (design.m, kmax)
    g_study = x_rng.standard_normal(shape)
    g_noise = x_rng.standard_normal(shape)
    w = copula_rho * g_study + math.sqrt(1.0 - copula_rho**2) * g_noise
    x = fam.quantile(np.clip(ndtr(g_study), _U_EPS, 1.0 - _U_EPS), gamma)
    y = _nominate(x, w, k, z)
    return RnsDataset(y, k, z)


def draw_finite_population(population, design: DesignParams, ranking: str,
                           seed, nreps: int = 1):
    """Nomination sampling from an empirical population of (x, w) rows.

    Sets are drawn without replacement within a set and with replacement
    across sets.  ``ranking`` selects the column used to pick the extreme:
    "by_x" ranks on the study values (perfect), "by_w" on the concomitant.
    Returns a single dataset for nreps=1, else a list of datasets.
    """
    pop = np.asarray(population, dtype=float)
    if pop.ndim != 2 or pop.shape[1] != 2 or len(pop) == 0:
        raise ValueError("population must be a nonempty array of (x, w) rows")
    if ranking not in ("by_x", "by_w"):
        raise ValueError(f"ranking must be 'by_x' or 'by_w', got {ranking!r}")
    kmax = design.max_set_size
    if len(pop) < kmax:
        raise ValueError(
            f"population of {len(pop)} rows cannot fill sets of size {kmax}")
    y, k, z = draw_finite_population_batch(pop, design, ranking, seed, nreps)
    datasets = [RnsDataset(y[r], k[r], z[r]) for r in range(nreps)]
    return datasets[0] if nreps == 1 else datasets


def draw_finite_population_batch(pop: np.ndarray, design: DesignParams,
                                 ranking: str, seed, nreps: int):
    d_rng, x_rng = _streams(seed, 2)
    k, z = _draw_k_z(d_rng, design, nreps)
    kmax = design.max_set_size
    n = len(pop)
    idx = x_rng.integers(0, n, size=(nreps, design.m, kmax))
    if kmax > 1:
        while True:
            srt = np.sort(idx, axis=-1)
            dup = (srt[..., 1:] == srt[..., :-1]).any(axis=-1)
            if not dup.any():
                break
            idx[dup] = x_rng.integers(0, n, size=(int(dup.sum()), kmax))
    x = pop[:, 0][idx]
    rank_col = x if ranking == "by_x" else pop[:, 1][idx]
    y = _nominate(rank_col, None, k, z, values=x)
    return y, k, z


def _nominate(x, w, k, z, values=None):
    """Pick the per-set extreme of the ranking column; ties keep first index."""
    rank_col = x if w is None else w
    take_from = x if values is None else values
    kmax = rank_col.shape[-1]
    active = np.arange(kmax) < np.expand_dims(k, -1)
    hi = np.where(active, rank_col, -np.inf).argmax(axis=-1)
    lo = np.where(active, rank_col, np.inf).argmin(axis=-1)
    pick = np.where(z == 1, hi, lo)
    return np.take_along_axis(take_from, np.expand_dims(pick, -1), axis=-1)[..., 0]


def write_dataset_csv(ds: RnsDataset, path, meta: dict | None = None) -> None:
    """Dataset CSV with columns y,k,z; hidden fields are left empty."""
    with open(path, "w", newline="") as fh:
        if meta:
            fh.write("# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
        writer = csv.writer(fh)
        writer.writerow(["y", "k", "z"])
        show_k, show_z = ds.visibility.shows_k, ds.visibility.shows_z
        for i in range(ds.m):
            writer.writerow([
                format(ds._y[i], ".17g"),
                str(ds._k[i]) if show_k else "",
                str(ds._z[i]) if show_z else "",
            ])


def read_dataset_csv(path) -> RnsDataset:
    """Read a y,k,z CSV back; visibility is inferred from the empty columns."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh)
                if r and not r[0].lstrip().startswith("#")]
    if not rows or [c.strip() for c in rows[0]] != ["y", "k", "z"]:
        raise ValueError(f"{path}: expected header 'y,k,z'")
    body = rows[1:]
    if not body:
        raise ValueError(f"{path}: dataset has no rows")
    y = np.array([float(r[0]) for r in body])
    k_cells = [r[1].strip() for r in body]
    z_cells = [r[2].strip() for r in body]
    has_k = _column_state(k_cells, path, "k")
    has_z = _column_state(z_cells, path, "z")
    k = np.array([int(c) for c in k_cells]) if has_k else np.ones(len(y), dtype=int)
    z = np.array([int(c) for c in z_cells]) if has_z else np.ones(len(y), dtype=int)
    vis = {(True, True): Visibility.COMPLETE, (True, False): Visibility.TYPE_I,
           (False, True): Visibility.TYPE_II, (False, False): Visibility.TYPE_III}
    return RnsDataset(y, k, z, vis[(has_k, has_z)])


def _column_state(cells: Sequence[str], path, name: str) -> bool:
    filled = [c != "" for c in cells]
    if any(filled) and not all(filled):
        raise ValueError(f"{path}: column {name} must be entirely filled or empty")
    return all(filled)
