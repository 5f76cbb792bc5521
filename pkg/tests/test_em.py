import math

import numpy as np
import pytest

from rnstat.errors import VisibilityError
from rnstat.models import get_family
from rnstat.sampler import DesignParams, RnsDataset, draw_complete, srs_design
from rnstat.complete import complete_ml, srs_ml
from rnstat.em import (
    EmConfig,
    em_type1,
    em_type1_batch,
    em_type2,
    em_type3,
    loglik_type1,
    loglik_type2,
    loglik_type3,
)
from rnstat import em as em_mod

PHR_EXP = get_family("phr-exp")
PRHR_BETA = get_family("prhr-beta")


def direct_loglik_type1(fam, gamma, y, k, zeta):
    total = 0.0
    for yi, ki in zip(y, k):
        F = fam.cdf(yi, gamma)
        total += (math.log(ki) + math.log(fam.pdf(yi, gamma))
                  + math.log(zeta * F ** (ki - 1) + (1 - zeta) * (1 - F) ** (ki - 1)))
    return total


def random_dataset(fam, rng, design, gamma):
    return draw_complete(fam, gamma, design, seed=int(rng.integers(1 << 31)))


def test_loglik_type1_hand_oracle():
    y, k = [0.8, 1.3], [2, 3]
    ds = RnsDataset(y, k, [1, 1]).project("type1")
    got = loglik_type1(PHR_EXP, 1.2, ds, zeta=0.4)
    assert got == pytest.approx(direct_loglik_type1(PHR_EXP, 1.2, y, k, 0.4),
                                rel=1e-12)


def test_loglik_type1_reductions():
    # unit set sizes: mixture term vanishes, leaving the SRS log likelihood
    y = [0.5, 2.0, 1.1]
    ds = RnsDataset(y, [1, 1, 1], [1, 0, 1]).project("type1")
    srs = float(np.sum(np.log(PHR_EXP.pdf(np.array(y), 0.9))))
    assert loglik_type1(PHR_EXP, 0.9, ds, zeta=0.3) == pytest.approx(srs, rel=1e-12)

    # zeta = 1 matches the complete-data log likelihood with all maxima
    from scipy.special import xlogy

    y2, k2 = np.array([0.7, 1.9]), np.array([3, 2])
    ds2 = RnsDataset(y2, k2, [1, 1]).project("type1")
    F = PHR_EXP.cdf(y2, 1.5)
    complete = float(np.sum(np.log(k2) + np.log(PHR_EXP.pdf(y2, 1.5))
                            + xlogy(k2 - 1, F)))
    assert loglik_type1(PHR_EXP, 1.5, ds2, zeta=1.0) == pytest.approx(complete,
                                                                      rel=1e-12)


def test_loglik_type2_and_type3_consistency():
    # point-mass rho collapses type-2 to the conditional likelihood at k0
    y = np.array([0.4, 1.2, 0.9])
    ds = RnsDataset(y, [3, 3, 3], [1, 0, 1])
    l2 = loglik_type2(PHR_EXP, 1.1, ds.project("type2"), rho=(0, 0, 1.0))
    F = PHR_EXP.cdf(y, 1.1)
    z = np.array([1, 0, 1])
    direct = float(np.sum(np.log(PHR_EXP.pdf(y, 1.1))
                          + np.log(3 * np.where(z == 1, F, 1 - F) ** 2)))
    assert l2 == pytest.approx(direct, rel=1e-12)

    # type-3 with rho=(1,) is the SRS likelihood for any zeta
    ds1 = RnsDataset(y, [1, 1, 1], [1, 1, 1]).project("type3")
    srs = float(np.sum(np.log(PHR_EXP.pdf(y, 0.8))))
    assert loglik_type3(PHR_EXP, 0.8, ds1, rho=(1.0,), zeta=0.37) == pytest.approx(
        srs, rel=1e-12)


def test_type2_estep_hand_value():
    # two equally likely sizes, observed maximum, F(y) = 1/2
    y = np.array([[math.log(2.0)]])
    t = PHR_EXP.pivot(y)
    c1, c0, _, pk = em_mod._estep_type2(
        PHR_EXP, t, np.array([[1]]), np.array([1.0]),
        np.array([[0.5, 0.5]]))
    kpost = c1[0, 0] + 1
    assert kpost == pytest.approx(1.5, rel=1e-12)
    assert c0[0, 0] == 0.0
    assert pk.sum(axis=-1) == pytest.approx(1.0, rel=1e-12)


def test_em_type1_unit_sets_is_srs():
    y = [0.4, 2.2, 0.9, 1.4]
    ds = RnsDataset(y, [1] * 4, [1] * 4).project("type1")
    report, trace = em_type1(PHR_EXP, ds, EmConfig(zeta_known=0.6))
    assert report.converged
    assert report.iterations == 1
    assert report.estimate == pytest.approx(float(np.mean(y)), rel=1e-14)
    assert len(trace) == 2


def test_em_type1_degenerate_zeta_matches_complete_ml():
    ds = draw_complete(PHR_EXP, 2.0, DesignParams((0.0, 0.5, 0.5), 1.0, 12), seed=3)
    report, _ = em_type1(PHR_EXP, ds.project("type1"), EmConfig(zeta_known=1.0))
    assert report.estimate == complete_ml(PHR_EXP, ds).estimate


def test_em_type2_point_mass_matches_complete_ml():
    ds = draw_complete(PHR_EXP, 1.4, DesignParams((0, 0, 0, 1.0), 0.5, 10), seed=9)
    report, _ = em_type2(PHR_EXP, ds.project("type2"),
                         EmConfig(rho_known=(0, 0, 0, 1.0)))
    assert report.estimate == complete_ml(PHR_EXP, ds).estimate


def test_em_type3_degenerate_cases():
    ds1 = draw_complete(PHR_EXP, 0.7, srs_design(15), seed=21)
    report, _ = em_type3(PHR_EXP, ds1.project("type3"),
                         EmConfig(zeta_known=1.0, rho_known=(1.0,)))
    assert report.estimate == pytest.approx(srs_ml(PHR_EXP, ds1.y).estimate,
                                            rel=1e-12)

    ds2 = draw_complete(PHR_EXP, 1.1, DesignParams((0, 0, 1.0), 1.0, 10), seed=22)
    report2, _ = em_type3(PHR_EXP, ds2.project("type3"),
                          EmConfig(zeta_known=1.0, rho_known=(0, 0, 1.0)))
    assert report2.estimate == complete_ml(PHR_EXP, ds2).estimate


def test_em_requires_matching_visibility():
    ds = draw_complete(PHR_EXP, 1.0, srs_design(5), seed=1)
    with pytest.raises(VisibilityError):
        em_type1(PHR_EXP, ds.project("type3"))
    with pytest.raises(VisibilityError):
        em_type2(PHR_EXP, ds.project("type1"))


def test_em_type2_requires_rho_support():
    ds = draw_complete(PHR_EXP, 1.0, DesignParams((0.5, 0.5), 0.5, 6), seed=2)
    with pytest.raises(ValueError, match="rho"):
        em_type2(PHR_EXP, ds.project("type2"), EmConfig())


@pytest.mark.parametrize("fam", [PHR_EXP, PRHR_BETA])
@pytest.mark.parametrize("known", [True, False])
def test_em_ascent_random_instances(fam, known):
    rng = np.random.default_rng(101 if known else 202)
    rhos = [(0.4, 0.3, 0.2, 0.1), (0.1, 0.2, 0.3, 0.4), (0, 0, 0, 1.0)]
    for trial in range(12):
        gamma = float(rng.uniform(0.4, 4.0))
        rho = rhos[trial % 3]
        zeta = float(rng.uniform(0.05, 0.95))
        design = DesignParams(rho, zeta, 10)
        ds = random_dataset(fam, rng, design, gamma)
        plans = [
            (em_type1, ds.project("type1"),
             EmConfig(zeta_known=zeta) if known else EmConfig()),
            (em_type2, ds.project("type2"),
             EmConfig(rho_known=rho) if known
             else EmConfig(rho_init=(0.25,) * 4)),
            (em_type3, ds.project("type3"),
             EmConfig(zeta_known=zeta, rho_known=rho) if known
             else EmConfig(rho_init=(0.25,) * 4, zeta_init=0.5)),
        ]
        for fn, data, cfg in plans:
            report, trace = fn(fam, data, cfg)
            if known:
                # free design parameters can exceed the default iteration cap;
                # with them pinned the fit must converge
                assert report.converged
            diffs = np.diff(trace.loglik)
            assert diffs.min() > -1e-8, (fn.__name__, trial, diffs.min())


def test_em_posterior_sanity_and_fixed_point():
    rng = np.random.default_rng(5)
    design = DesignParams((0.4, 0.3, 0.2, 0.1), 0.7, 10)
    ds = random_dataset(PHR_EXP, rng, design, 1.5)
    cfg = EmConfig(max_iters=50_000, rho_init=(0.25,) * 4, zeta_init=0.5)
    report, trace = em_type3(PHR_EXP, ds.project("type3"), cfg)
    assert report.converged
    for rho_t in trace.rho:
        assert all(0 <= r <= 1 for r in rho_t)
        assert sum(rho_t) == pytest.approx(1.0, abs=1e-12)
    for zeta_t in trace.zeta:
        assert 0.0 <= zeta_t <= 1.0

    # one more E/M cycle from the converged point moves nothing
    t = np.atleast_2d(PHR_EXP.pivot(ds.y))
    g = np.array([report.estimate])
    zt = np.array([trace.zeta[-1]])
    rh = np.array([trace.rho[-1]])
    c1, c0, zpost, pk = em_mod._estep_type3(PHR_EXP, t, g, rh, zt, "joint")
    from rnstat.complete import solve_score_root

    new_gamma = solve_score_root(t, 1.0 + c0, c1)
    assert abs(new_gamma[0] - report.estimate) < cfg.tol * (1 + report.estimate)
    assert abs(zpost.mean() - zt[0]) < cfg.tol
    assert np.max(np.abs(pk.mean(axis=-2) - rh)) < cfg.tol


def test_batch_matches_scalar():
    rng = np.random.default_rng(33)
    design = DesignParams((0.4, 0.3, 0.2, 0.1), 0.8, 10)
    datasets = [random_dataset(PHR_EXP, rng, design, 2.0) for _ in range(6)]
    y = np.stack([d.y for d in datasets])
    k = np.stack([d.k for d in datasets])
    cfg = EmConfig(zeta_known=0.8)
    batch = em_type1_batch(PHR_EXP, y, k, cfg)
    for i, ds in enumerate(datasets):
        report, _ = em_type1(PHR_EXP, ds.project("type1"), cfg)
        assert report.estimate == batch.gamma[i]
        assert report.iterations == batch.iterations[i]


def test_trace_csv_round_trip(tmp_path):
    ds = draw_complete(PHR_EXP, 1.0, DesignParams((0.5, 0.5), 0.6, 8), seed=4)
    _, trace = em_type3(PHR_EXP, ds.project("type3"),
                        EmConfig(rho_init=(0.5, 0.5), zeta_init=0.5))
    path = tmp_path / "trace.csv"
    trace.to_csv(path, meta={"seed": 4})
    lines = path.read_text().strip().splitlines()
    assert lines[0].startswith("#")
    assert lines[1] == "iteration,gamma,zeta,rho1,rho2,loglik"
    assert len(lines) == len(trace) + 2


def test_max_iters_reports_nonconvergence():
    ds = draw_complete(PHR_EXP, 1.0, DesignParams((0.3, 0.7), 0.5, 10), seed=6)
    report, trace = em_type3(PHR_EXP, ds.project("type3"),
                             EmConfig(max_iters=2, rho_init=(0.5, 0.5),
                                      zeta_init=0.5))
    assert not report.converged
    assert report.iterations == 2
    assert len(trace) == 3
