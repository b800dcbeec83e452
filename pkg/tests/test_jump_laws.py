"""Jump-size laws: sampling, cdf, moments, and support validation."""

import math

import numpy as np
import pytest
from scipy import stats

from jdrisk.model import JumpLaw

CONTINUOUS_LAWS = [
    JumpLaw.exponential(0.5),
    JumpLaw.mixed_exponential(0.7, 0.5, 0.3),
    JumpLaw.normal(0.2, 0.6),
    JumpLaw.shifted_lognormal(0.05, 0.25),
]

DISCRETE_LAWS = [
    JumpLaw.point_mass(0.8),
    JumpLaw.empirical([-0.5, 0.1, 1.2], [0.2, 0.5, 0.3]),
]


@pytest.mark.parametrize("law", CONTINUOUS_LAWS + DISCRETE_LAWS,
                         ids=lambda l: l.family)
def test_sample_mean_consistency(law):
    # empirical mean of 1e6 samples within 4 standard errors of mean()
    rng = np.random.default_rng(1234)
    x = law.sample(rng, 1_000_000)
    se = x.std(ddof=1) / math.sqrt(len(x))
    assert abs(x.mean() - law.mean()) < 4 * se + 1e-12


@pytest.mark.parametrize("law", CONTINUOUS_LAWS, ids=lambda l: l.family)
def test_sampling_matches_cdf_ks(law):
    rng = np.random.default_rng(777)
    x = law.sample(rng, 100_000)
    res = stats.kstest(x, lambda v: np.asarray(law.cdf(v), dtype=float))
    assert res.pvalue > 0.001


@pytest.mark.parametrize("law", CONTINUOUS_LAWS, ids=lambda l: l.family)
def test_pdf_integrates_to_cdf(law):
    from scipy.integrate import quad
    lo = law.ppf(1e-13)
    for x in (-0.4, 0.1, 0.9):
        if x <= lo:
            continue
        val = quad(lambda t: float(law.pdf(np.asarray(t))), lo, x,
                   points=[0.0] if lo < 0.0 < x else None, limit=200)[0]
        assert val == pytest.approx(float(law.cdf(x)), abs=1e-9)


@pytest.mark.parametrize("law", CONTINUOUS_LAWS, ids=lambda l: l.family)
def test_partial_mean_consistency(law):
    # M1(x) = E[S 1{S <= x}] against direct quadrature of z f(z)
    from scipy.integrate import quad
    lo = law.ppf(1e-14)
    for x in (0.3, 1.5):
        want = quad(lambda t: t * float(law.pdf(np.asarray(t))), lo, x,
                    points=[0.0] if lo < 0 else None, limit=200)[0]
        assert float(law.partial_mean(x)) == pytest.approx(want, abs=1e-10)
    # full mass recovers the mean
    hi = law.ppf(1.0 - 1e-14)
    assert float(law.partial_mean(hi)) == pytest.approx(law.mean(), abs=1e-8)


def test_expect_tail_probability():
    law = JumpLaw.exponential(0.5)
    got = law.expect(lambda z: np.ones_like(z), lo=1.0)
    assert got == pytest.approx(math.exp(-2.0), rel=1e-9)


def test_expect_atoms_boundary_inclusive():
    law = JumpLaw.empirical([0.5, 1.0, 2.0], [0.2, 0.3, 0.5])
    # (lo, hi] convention: atom at the upper boundary included
    assert law.expect(lambda z: np.ones_like(z), hi=1.0) == pytest.approx(0.5)
    assert law.expect(lambda z: np.ones_like(z), lo=1.0) == pytest.approx(0.5)


class TestReturnRoleSupport:
    def test_normal_rejected(self):
        with pytest.raises(ValueError):
            JumpLaw.normal(0.0, 0.1, role="return")

    def test_mixed_exponential_rejected(self):
        with pytest.raises(ValueError):
            JumpLaw.mixed_exponential(0.5, 0.5, 0.5, role="return")

    def test_point_mass_at_or_below_minus_one_rejected(self):
        with pytest.raises(ValueError):
            JumpLaw.point_mass(-1.0, role="return")
        with pytest.raises(ValueError):
            JumpLaw.point_mass(-1.5, role="return")
        JumpLaw.point_mass(-0.9, role="return")  # fine

    def test_empirical_support_checked(self):
        with pytest.raises(ValueError):
            JumpLaw.empirical([-1.2, 0.5], [0.5, 0.5], role="return")
        JumpLaw.empirical([-0.99, 0.5], [0.5, 0.5], role="return")

    def test_lognormal_and_exponential_ok(self):
        JumpLaw.shifted_lognormal(0.0, 1.0)
        JumpLaw.exponential(2.0, role="return")


def test_ppf_roundtrip():
    for law in CONTINUOUS_LAWS:
        for q in (1e-6, 0.25, 0.5, 0.9, 1 - 1e-6):
            assert float(law.cdf(law.ppf(q))) == pytest.approx(q, abs=1e-9)


def test_kernel_encoding_shapes():
    for law in CONTINUOUS_LAWS + DISCRETE_LAWS:
        kind, par = law.kernel_encoding()
        assert par.dtype == np.float64
        assert kind >= 0
    kind, par = JumpLaw.empirical([0.1, 0.9], [0.4, 0.6]).kernel_encoding()
    assert par[0] == 2 and par[-1] == pytest.approx(1.0)
