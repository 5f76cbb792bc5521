import math

import numpy as np
import pytest

from rnstat.errors import VisibilityError
from rnstat.models import get_family
from rnstat.sampler import DesignParams, RnsDataset, draw_complete_batch, srs_design
from rnstat.special import harmonic
from rnstat.complete import (
    alpha_beta,
    analytic_moments,
    complete_ml,
    general_mml,
    mans_mml,
    mins_closed_form,
    select_closed_form,
    srs_ml,
    unbiased_mml,
)

PHR_EXP = get_family("phr-exp")
PRHR_BETA = get_family("prhr-beta")


def complete_loglik(fam, ds, gamma):
    """Exact complete-data log likelihood, written independently of the score."""
    from scipy.special import xlogy

    y, k, z = ds.y, ds.k, ds.z
    F = fam.cdf(y, gamma)
    Fbar = 1.0 - F
    with np.errstate(divide="ignore"):
        return float(np.sum(np.log(k) + np.log(fam.pdf(y, gamma))
                            + xlogy(z * (k - 1), F)
                            + xlogy((1 - z) * (k - 1), Fbar)))


def grid_mle(fam, ds, lo, hi):
    """Brute-force likelihood maximization, refined to ~1e-6 resolution."""
    for _ in range(4):
        grid = np.linspace(lo, hi, 1001)
        vals = [complete_loglik(fam, ds, g) for g in grid]
        best = int(np.argmax(vals))
        lo = grid[max(best - 1, 0)]
        hi = grid[min(best + 1, len(grid) - 1)]
    return 0.5 * (lo + hi)


def test_alpha_beta_invariants():
    for k in range(1, 8):
        for z in (0, 1):
            a, b = alpha_beta(k, z)
            assert a == (1 - z) * (k - 1) + 2
            assert b == z * (k - 1)
            assert a + b == k + 1
            assert a >= 1 and b >= 0


def test_srs_ml_examples():
    rep = srs_ml(PHR_EXP, [2.0, 4.0])
    assert rep.estimate == pytest.approx(3.0, rel=1e-14)
    assert rep.analytic_var == pytest.approx(9.0 / 2, rel=1e-12)
    rep2 = srs_ml(PRHR_BETA, [math.exp(-1), math.exp(-3)])
    assert rep2.estimate == pytest.approx(2.0, rel=1e-12)
    rep3 = srs_ml(PHR_EXP, [1.0])
    assert rep3.estimate == pytest.approx(1.0, rel=1e-14)
    with pytest.raises(ValueError):
        srs_ml(PHR_EXP, [1.0, 0.0])  # boundary observation
    with pytest.raises(ValueError):
        srs_ml(PRHR_BETA, [0.5, 1.0])


def test_mins_closed_form_examples():
    ds = RnsDataset([0.5, 0.2], [2, 3], [0, 0])
    rep = mins_closed_form(PHR_EXP, ds)
    assert rep.estimate == pytest.approx(0.8, rel=1e-14)
    assert rep.analytic_var == pytest.approx(0.8**2 / 2, rel=1e-12)

    srs_like = RnsDataset([0.5, 0.2], [1, 1], [0, 0])
    assert mins_closed_form(PHR_EXP, srs_like).estimate == pytest.approx(
        srs_ml(PHR_EXP, [0.5, 0.2]).estimate, rel=1e-14)

    mirror = RnsDataset([math.exp(-1), math.exp(-2)], [2, 2], [1, 1])
    assert mins_closed_form(PRHR_BETA, mirror).estimate == pytest.approx(3.0,
                                                                         rel=1e-13)
    with pytest.raises(ValueError, match="indices"):
        mins_closed_form(PHR_EXP, RnsDataset([0.5, 0.2], [2, 3], [0, 1]))


def test_mans_mml_examples():
    ds = RnsDataset([1.2, 1.8], [2, 2], [1, 1])
    rep = mans_mml(PHR_EXP, ds)
    assert rep.estimate == pytest.approx(1.0, rel=1e-14)
    single = RnsDataset([0.7], [1], [1])
    assert mans_mml(PHR_EXP, single).estimate == pytest.approx(0.7, rel=1e-14)
    # variance anchor for fixed k=5
    factor = harmonic(5, 2) / harmonic(5) ** 2
    assert factor == pytest.approx(0.28073, abs=5e-6)
    with pytest.raises(ValueError):
        mans_mml(PHR_EXP, RnsDataset([1.2, 1.8], [2, 2], [1, 0]))


def test_complete_ml_reduces_to_closed_forms():
    ds = RnsDataset([0.5, 0.2], [2, 3], [0, 0])
    assert complete_ml(PHR_EXP, ds).estimate == pytest.approx(0.8, abs=1e-10)
    srs_like = RnsDataset([0.4, 0.9, 2.0], [1, 1, 1], [1, 0, 1])
    assert complete_ml(PHR_EXP, srs_like).estimate == pytest.approx(
        np.mean([0.4, 0.9, 2.0]), abs=1e-12)


def test_complete_ml_against_grid_oracle():
    ds = RnsDataset([1.0], [2], [1])
    root = complete_ml(PHR_EXP, ds).estimate
    assert root == pytest.approx(grid_mle(PHR_EXP, ds, 0.01, 5.0), abs=5e-6)

    rng = np.random.default_rng(123)
    for trial in range(8):
        m = int(rng.integers(3, 9))
        k = rng.integers(1, 5, size=m)
        z = rng.integers(0, 2, size=m)
        fam = PHR_EXP if trial % 2 == 0 else PRHR_BETA
        u = rng.uniform(0.05, 0.95, size=m)
        y = fam.quantile(u, 1.0)
        ds = RnsDataset(y, k, z)
        root = complete_ml(fam, ds).estimate
        oracle = grid_mle(fam, ds, root / 8, root * 8)
        assert root == pytest.approx(oracle, rel=2e-5)


def test_complete_ml_requires_complete_visibility():
    ds = RnsDataset([0.5, 0.2], [2, 3], [0, 0]).project("type1")
    with pytest.raises(VisibilityError):
        complete_ml(PHR_EXP, ds)


def test_general_mml_reductions_and_example():
    rng = np.random.default_rng(5)
    # all-maxima reduction to the harmonic closed form
    for k in range(2, 11):
        for m in range(1, 6):
            y = PHR_EXP.quantile(rng.uniform(0.1, 0.9, m), 1.0)
            ds = RnsDataset(y, np.full(m, k), np.ones(m, dtype=int))
            assert general_mml(PHR_EXP, ds).estimate == pytest.approx(
                mans_mml(PHR_EXP, ds).estimate, rel=1e-12)
    # mixed-design denominator from the worked example
    ds = RnsDataset([1.0, 0.5], [2, 2], [1, 0])
    t = ds.y  # exponential pivots equal the observations
    expected = (1 * t[0] + 2 * t[1]) / 2.5
    assert general_mml(PHR_EXP, ds).estimate == pytest.approx(expected, rel=1e-12)
    # k = 1 everywhere reduces to the SRS estimator
    ds1 = RnsDataset([0.3, 0.9], [1, 1], [1, 1])
    assert general_mml(PHR_EXP, ds1).estimate == pytest.approx(0.6, rel=1e-13)
    # all-minima input delegates to the closed form
    ds0 = RnsDataset([0.3, 0.9], [3, 2], [0, 0])
    assert general_mml(PHR_EXP, ds0).method == "mins_closed_form"


def test_unbiased_mml_factor_is_unity_on_binary_indicators():
    ds = RnsDataset([1.0, 0.5], [2, 2], [1, 0])
    g = general_mml(PHR_EXP, ds)
    u = unbiased_mml(PHR_EXP, ds)
    assert u.estimate == pytest.approx(g.estimate, rel=1e-12)
    ds_k1 = RnsDataset([0.3, 0.9], [1, 1], [1, 1])
    assert unbiased_mml(PHR_EXP, ds_k1).estimate == pytest.approx(0.6, rel=1e-12)


def test_select_closed_form_dispatch():
    mins = RnsDataset([0.5, 0.2], [2, 3], [0, 0])
    assert select_closed_form(PHR_EXP, mins).method == "mins_closed_form"
    mans = RnsDataset([1.2, 1.8], [2, 2], [1, 1])
    assert select_closed_form(PHR_EXP, mans).method == "mans_mml"
    mixed = RnsDataset([1.0, 0.5], [2, 2], [1, 0])
    assert select_closed_form(PHR_EXP, mixed).method == "general_mml"
    # PRHR role swap: all-maxima data is the low-information extreme
    prhr_max = RnsDataset([0.4, 0.6], [2, 2], [1, 1])
    assert select_closed_form(PRHR_BETA, prhr_max).method == "mins_closed_form"


def test_analytic_moments():
    mean_f, var_f = analytic_moments([(5, 1)], "phr")
    assert mean_f == pytest.approx(1.0, rel=1e-12)
    assert var_f == pytest.approx(harmonic(5, 2) / harmonic(5) ** 2, rel=1e-12)
    mean_f, var_f = analytic_moments([(3, 0)] * 4, "phr")
    assert (mean_f, var_f) == (1.0, pytest.approx(0.25, rel=1e-12))
    mean_f, var_f = analytic_moments([(1, 1)] * 10, "phr")
    assert var_f == pytest.approx(0.1, rel=1e-12)
    # mirrored family: same factors with flipped z
    assert analytic_moments([(5, 0)], "prhr") == analytic_moments([(5, 1)], "phr")
    mixed = analytic_moments([(2, 1), (2, 0)], "phr")
    assert mixed[0] == pytest.approx(1.0, rel=1e-12)


def test_monte_carlo_unbiasedness_and_variance():
    gamma, m, reps = 1.0, 10, 100_000
    for k, zeta, estimator in [(2, 0.0, "mins"), (5, 0.0, "mins"),
                               (2, 1.0, "mans"), (5, 1.0, "mans")]:
        design = DesignParams((0.0,) * (k - 1) + (1.0,), zeta, m)
        y, kk, zz = draw_complete_batch(PHR_EXP, gamma, design, seed=77, nreps=reps)
        t = PHR_EXP.pivot(y)
        if estimator == "mins":
            est = (kk * t).mean(axis=1)
            var_factor = 1.0 / m
        else:
            est = t.sum(axis=1) / (m * harmonic(k))
            var_factor = harmonic(k, 2) / (m * harmonic(k) ** 2)
        se = est.std() / math.sqrt(reps)
        assert abs(est.mean() - gamma) < 3 * se
        assert est.var() == pytest.approx(var_factor * gamma**2, rel=0.02)


def test_unbiased_mml_monte_carlo_mean():
    gamma, m, reps = 1.0, 10, 20_000
    design = DesignParams((0.0, 1.0), 0.5, m)
    y, k, z = draw_complete_batch(PHR_EXP, gamma, design, seed=17, nreps=reps)
    ests = np.empty(reps)
    for r in range(reps):
        ests[r] = unbiased_mml(PHR_EXP, RnsDataset(y[r], k[r], z[r])).estimate
    se = ests.std() / math.sqrt(reps)
    assert abs(ests.mean() - gamma) < 3 * se


def test_scale_equivariance():
    y = np.array([0.31, 1.7, 0.42, 2.9])
    k = np.array([2, 3, 1, 4])
    z = np.array([1, 0, 1, 1])
    c = 2.0  # power of two keeps closed-form scaling exact in floating point
    ds = RnsDataset(y, k, z)
    scaled = RnsDataset(c * y, k, z)
    for fn in (general_mml, unbiased_mml, select_closed_form):
        assert fn(PHR_EXP, scaled).estimate == pytest.approx(
            c * fn(PHR_EXP, ds).estimate, rel=1e-14)
    assert complete_ml(PHR_EXP, scaled).estimate == pytest.approx(
        c * complete_ml(PHR_EXP, ds).estimate, rel=1e-12)
