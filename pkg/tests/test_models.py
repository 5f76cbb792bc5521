import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rnstat.models import FAMILIES, get_family

PHR_EXP = get_family("phr-exp")
PHR_PARETO = get_family("phr-pareto")
PRHR_BETA = get_family("prhr-beta")
PRHR_GEXP = get_family("prhr-gexp")


def interior_grid(fam, gamma, n=1000):
    u = np.linspace(0.001, 0.999, n)
    return fam.quantile(u, gamma)


def test_cdf_closed_forms():
    x = np.array([0.1, 0.5, 2.0, 7.0])
    lam = 2.5
    assert PHR_EXP.cdf(x, lam) == pytest.approx(1 - np.exp(-x / lam), rel=1e-12)
    u = np.array([0.05, 0.3, 0.9])
    eta = 2.0
    assert PRHR_BETA.cdf(u, eta) == pytest.approx(u ** (1 / eta), rel=1e-12)
    assert PRHR_GEXP.cdf(x, eta) == pytest.approx((1 - np.exp(-x)) ** (1 / eta),
                                                  rel=1e-12)
    assert PHR_PARETO.cdf(np.array([1.5, 4.0]), lam) == pytest.approx(
        1 - np.array([1.5, 4.0]) ** (-1 / lam), rel=1e-12)


def test_cdf_support_edges_clamp():
    for key, fam in FAMILIES.items():
        c, d = fam.support
        assert fam.cdf(c, 1.7) == 0.0
        assert fam.cdf(c - 1.0, 1.7) == 0.0
        if math.isfinite(d):
            assert fam.cdf(d, 1.7) == 1.0
            assert fam.cdf(d + 1.0, 1.7) == 1.0
        else:
            assert fam.cdf(1e12, 1.7) > 1 - 1e-6


def test_pdf_values():
    assert PHR_EXP.pdf(0.0, 2.0) == pytest.approx(0.5, abs=1e-14)
    assert PHR_EXP.pdf(1.0, 1.0) == pytest.approx(math.exp(-1), rel=1e-13)
    assert PRHR_BETA.pdf(0.3, 1.0) == pytest.approx(1.0, abs=1e-14)
    assert PHR_EXP.pdf(-0.5, 1.0) == 0.0
    assert PRHR_BETA.pdf(1.5, 1.0) == 0.0


def test_pdf_matches_cdf_finite_difference():
    h = 1e-6
    for fam, gamma in [(PHR_EXP, 0.7), (PHR_PARETO, 1.3),
                       (PRHR_BETA, 2.2), (PRHR_GEXP, 0.9)]:
        x = interior_grid(fam, gamma, 41)[5:-5]
        numeric = (fam.cdf(x + h, gamma) - fam.cdf(x - h, gamma)) / (2 * h)
        assert fam.pdf(x, gamma) == pytest.approx(numeric, rel=1e-5)


def test_pdf_integrates_to_one():
    from scipy import integrate

    for fam, gamma in [(PHR_EXP, 1.5), (PRHR_BETA, 3.0)]:
        c, d = fam.support
        hi = d if math.isfinite(d) else fam.quantile(1 - 1e-12, gamma)
        total, _ = integrate.quad(lambda v: fam.pdf(v, gamma), c, hi)
        assert total == pytest.approx(1.0, abs=1e-6)


def test_quantile_examples():
    assert PHR_EXP.quantile(1 - math.exp(-1), 1.0) == pytest.approx(1.0, rel=1e-12)
    assert PRHR_BETA.quantile(0.25, 2.0) == pytest.approx(0.0625, rel=1e-12)
    for fam in FAMILIES.values():
        assert fam.quantile(0.0, 1.0) == fam.support[0]
    with pytest.raises(ValueError):
        PHR_EXP.quantile(-0.1, 1.0)
    with pytest.raises(ValueError):
        PHR_EXP.quantile(1.1, 1.0)


def test_quantile_cdf_round_trip():
    for fam, gamma in [(PHR_EXP, 0.8), (PHR_PARETO, 2.0),
                       (PRHR_BETA, 1.6), (PRHR_GEXP, 3.1)]:
        u = np.linspace(1e-3, 1 - 1e-3, 1000)
        back = fam.cdf(fam.quantile(u, gamma), gamma)
        assert np.max(np.abs(back - u) / u) < 1e-10


@settings(max_examples=60, deadline=None)
@given(
    st.sampled_from(sorted(FAMILIES)),
    st.floats(min_value=0.05, max_value=20.0),
    st.floats(min_value=1e-6, max_value=1 - 1e-6),
)
def test_quantile_inverts_cdf_property(key, gamma, u):
    fam = get_family(key)
    assert fam.cdf(fam.quantile(u, gamma), gamma) == pytest.approx(
        u, rel=1e-9, abs=1e-12)


def test_hazard_rates_match_table_forms():
    lam = 2.0
    x = np.array([0.2, 1.0, 5.0])
    assert PHR_EXP.hazard(x, lam) == pytest.approx(np.full(3, 1 / lam), rel=1e-12)
    eta = 3.0
    u = np.array([0.1, 0.4, 0.9])
    assert PRHR_BETA.reverse_hazard(u, eta) == pytest.approx(1 / (eta * u),
                                                             rel=1e-12)
    xp = np.array([1.5, 3.0])
    assert PHR_PARETO.hazard(xp, lam) == pytest.approx(1 / (lam * xp), rel=1e-12)


def test_hazard_divergence_sentinels():
    assert PRHR_BETA.reverse_hazard(0.0, 1.0) == math.inf
    assert PRHR_BETA.hazard(1.0, 1.0) == math.inf


def test_pivot_is_unit_exponential_under_model():
    rng = np.random.default_rng(42)
    n = 200_000
    for fam, gamma in [(PHR_EXP, 2.5), (PHR_PARETO, 0.7),
                       (PRHR_BETA, 1.9), (PRHR_GEXP, 1.2)]:
        x = fam.quantile(rng.random(n), gamma)
        e = fam.pivot(x) / gamma
        assert abs(e.mean() - 1.0) < 3.0 / math.sqrt(n)
        assert abs(e.var() - 1.0) < 3.0 * math.sqrt(8.0 / n)


def test_gamma_validation_and_registry():
    with pytest.raises(ValueError):
        PHR_EXP.cdf(1.0, 0.0)
    with pytest.raises(ValueError):
        PHR_EXP.quantile(0.5, -2.0)
    with pytest.raises(ValueError):
        get_family("weibull")
    assert set(FAMILIES) == {"phr-exp", "phr-pareto", "prhr-beta", "prhr-gexp"}
