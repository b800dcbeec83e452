"""Special functions and the jump-free closed forms."""

import math
import warnings

import numpy as np
import pytest

from jdrisk.model import RiskParams
from jdrisk.specialfn import (DEParams, alpha_beta, canonical_de_params,
                              closed_barrier_value, closed_gerber_no_jumps,
                              closed_ruin_rho1, closed_threshold_value,
                              de_derivative_check, eval_D, eval_DE, eval_E,
                              eval_K, k_infinity)

# frozen oracle for the corrected ruin scale function: an independent
# collocation solve of the governing two-point boundary problem
# (p=1, r=0.2, sigma_P=1, sigma_R=0.5, rho=1) gives
PSI_RHO1_ORACLE = {0.5: 0.661961, 1.0: 0.498672, 2.0: 0.342358}

RHO1 = RiskParams(p=1.0, sigma_P=1.0, lambda_P=0.0, r=0.2, sigma_R=0.5,
                  lambda_R=0.0, rho=1.0, delta=0.0)
GERBER = RiskParams(p=1.0, sigma_P=1.0, lambda_P=0.0, r=0.05, sigma_R=0.5,
                    lambda_R=0.0, rho=0.3, delta=0.1)
THRESH = RiskParams(p=1.0, sigma_P=1.0, lambda_P=0.0, r=0.05, sigma_R=0.5,
                    lambda_R=0.0, rho=0.0, delta=0.1)


class TestAlphaBeta:
    def test_reference_values(self):
        ab = alpha_beta(0.1, 0.05, 0.5)
        assert ab.beta == pytest.approx(0.886796, abs=5e-7)
        assert ab.alpha == pytest.approx(0.243398, abs=5e-7)

    def test_identity_random_draws(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            delta = rng.uniform(0.01, 2.0)
            r = rng.uniform(0.0, 1.0)
            sr = rng.uniform(0.05, 2.0)
            ab = alpha_beta(delta, r, sr)
            assert abs(ab.beta - 2 * ab.alpha - 2 * r / sr**2) < 1e-12

    def test_large_delta_asymptote(self):
        # beta + 1 ~ sqrt(8 delta) / sigma_R when the delta term dominates
        ab = alpha_beta(1e6, 0.05, 0.5)
        assert ab.beta + 1 == pytest.approx(math.sqrt(8e6) / 0.5, rel=1e-4)

    def test_positive_iff_delta_above_r(self):
        assert alpha_beta(0.2, 0.1, 0.5).alpha > 0
        assert alpha_beta(0.05, 0.1, 0.5).alpha < 0

    def test_sigma_r_zero_rejected(self):
        with pytest.raises(ValueError):
            alpha_beta(0.1, 0.05, 0.0)


class TestEvalDE:
    def setup_method(self):
        self.de = canonical_de_params(GERBER)
        self.lam = self.de.ab.alpha + 1.0

    def test_d_vanishes_at_plus_infinity(self):
        # slow power decay: check monotone convergence toward zero
        d1, d2, d3 = (eval_D(x, self.lam, self.de) for x in (10.0, 1e3, 1e5))
        assert d1 > d2 > d3 > 0
        assert d3 < 2e-2 * d1

    def test_e_vanishes_at_minus_infinity(self):
        e1, e2, e3 = (eval_E(x, self.lam, self.de) for x in (-10.0, -1e2, -1e3))
        assert e1 > e2 > e3 > 0
        assert e3 < 0.1 * e1

    def test_two_rule_agreement(self):
        # spec probe: x=0.5, lam=alpha+1, delta=0.1, r=0.05, sigma_P=1,
        # sigma_R=0.5, c=1: the adaptive value must match an independent
        # high-order rule at doubled nodes within 1e-9 relative
        de = DEParams(c=1.0, sigma_P=1.0, sigma_R=0.5, r=0.05, delta=0.1)
        lam = de.ab.alpha + 1.0
        for x in (0.5, 1.5, -0.3):
            a_val = eval_D(x, lam, de, rule="adaptive")
            c_val = eval_D(x, lam, de, rule="composite", panels=192)
            assert abs(a_val - c_val) / abs(c_val) < 1e-9
            a_e = eval_E(x, lam, de, rule="adaptive")
            c_e = eval_E(x, lam, de, rule="composite", panels=192)
            assert abs(a_e - c_e) / abs(c_e) < 1e-9

    def test_monotone_positive_on_grid(self):
        xs = np.linspace(-2.0, 6.0, 30)
        dvals = [eval_D(x, self.lam, self.de) for x in xs]
        evals = [eval_E(x, self.lam, self.de) for x in xs]
        assert all(v > 0 for v in dvals)
        assert all(v > 0 for v in evals)
        assert all(a > b for a, b in zip(dvals, dvals[1:]))
        assert all(a < b for a, b in zip(evals, evals[1:]))

    def test_divergent_endpoint_rejected(self):
        # beta - lam <= -1 has a non-integrable cosine endpoint
        with pytest.raises(ValueError):
            eval_D(0.5, self.de.ab.beta + 1.5, self.de)

    def test_derivative_identities(self):
        (ld, rd), (le, re_) = de_derivative_check(0.7, self.lam, self.de)
        assert abs(ld - rd) / abs(rd) < 1e-5
        assert abs(le - re_) / abs(re_) < 1e-5

    def test_derivative_identities_random(self):
        rng = np.random.default_rng(23)
        for _ in range(25):
            delta = rng.uniform(0.06, 0.8)
            r = rng.uniform(0.0, min(delta * 0.9, 0.4))
            sr = rng.uniform(0.2, 1.0)
            sp = rng.uniform(0.3, 2.0)
            c = rng.uniform(0.2, 2.0)
            de = DEParams(c=c, sigma_P=sp, sigma_R=sr, r=r, delta=delta)
            beta = de.ab.beta
            lam = 1.0 + rng.uniform(0.05, 0.9) * min(beta, 1.5)
            x = rng.uniform(-1.0, 3.0)
            (ld, rd), (le, re_) = de_derivative_check(x, lam, de)
            assert abs(ld - rd) / max(abs(rd), 1e-12) < 1e-5
            assert abs(le - re_) / max(abs(re_), 1e-12) < 1e-5

    def test_derivative_check_needs_lam_above_one(self):
        with pytest.raises(ValueError):
            de_derivative_check(0.5, 0.9, self.de)


class TestScaleFunction:
    def test_ruin_at_zero_is_one(self):
        assert closed_ruin_rho1(0.0, RHO1) == 1.0

    def test_ruin_vanishes_at_infinity(self):
        assert closed_ruin_rho1(4000.0, RHO1) < 0.02
        assert closed_ruin_rho1(4000.0, RHO1) < closed_ruin_rho1(10.0, RHO1)

    def test_oracle_values(self):
        for u, want in PSI_RHO1_ORACLE.items():
            assert closed_ruin_rho1(u, RHO1) == pytest.approx(want, abs=2e-6)

    def test_two_quadrature_rules_agree(self):
        for u in (0.5, 1.0, 2.0):
            a = closed_ruin_rho1(u, RHO1, rule="adaptive")
            c64 = closed_ruin_rho1(u, RHO1, rule="composite", panels=64)
            c128 = closed_ruin_rho1(u, RHO1, rule="composite", panels=128)
            assert abs(a - c64) < 1e-9
            assert abs(a - c128) < 1e-9

    def test_diverging_scale_rejected(self):
        bad = RiskParams(p=1.0, sigma_P=1.0, lambda_P=0.0, r=0.05,
                         sigma_R=0.5, lambda_R=0.0, rho=1.0, delta=0.0)
        with pytest.raises(ValueError):
            k_infinity(bad)

    def test_other_correlations_unsupported(self):
        for rho in (-1.0, 0.5):
            bad = RiskParams(p=1.0, sigma_P=1.0, lambda_P=0.0, r=0.2,
                             sigma_R=0.5, lambda_R=0.0, rho=rho, delta=0.0)
            with pytest.raises(ValueError):
                eval_K(1.0, bad)


class TestClosedGerber:
    def test_boundary_value_one(self):
        assert closed_gerber_no_jumps(0.0, GERBER) == 1.0

    def test_decays_to_zero(self):
        g = [closed_gerber_no_jumps(u, GERBER) for u in (0.0, 0.5, 1, 2, 5, 20, 200)]
        assert all(a >= b for a, b in zip(g, g[1:]))
        assert 0 < g[-1] < 0.05

    def test_in_unit_interval(self):
        for u in np.linspace(0, 30, 16):
            v = closed_gerber_no_jumps(float(u), GERBER)
            assert 0.0 < v <= 1.0

    def test_requires_delta_above_r(self):
        bad = RiskParams(p=1.0, sigma_P=1.0, lambda_P=0.0, r=0.2, sigma_R=0.5,
                         lambda_R=0.0, rho=0.3, delta=0.1)
        with pytest.raises(ValueError):
            closed_gerber_no_jumps(1.0, bad)

    def test_perfect_correlation_unsupported(self):
        bad = RiskParams(p=1.0, sigma_P=1.0, lambda_P=0.0, r=0.05, sigma_R=0.5,
                         lambda_R=0.0, rho=1.0, delta=0.1)
        with pytest.raises(ValueError):
            closed_gerber_no_jumps(1.0, bad)


class TestClosedThreshold:
    B, MU = 2.0, 0.5

    def test_boundary_values(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error", RuntimeWarning)
            assert closed_threshold_value(0.0, self.B, self.MU, THRESH) == 0.0

    def test_printed_constants_agree_with_solved_system(self):
        # the solved pasting system and the printed constant formulas must
        # coincide; a RuntimeWarning would flag a disagreement
        from jdrisk.specialfn import _threshold_constants
        _threshold_constants.cache_clear()
        with warnings.catch_warnings():
            warnings.simplefilter("error", RuntimeWarning)
            closed_threshold_value(1.0, self.B, self.MU, THRESH)

    def test_value_and_slope_pasting(self):
        b = self.B
        v = lambda u: closed_threshold_value(u, b, self.MU, THRESH)
        assert abs(v(b - 1e-9) - v(b + 1e-9)) < 1e-8
        h = 5e-4
        slope_left = (3*v(b) - 4*v(b - h) + v(b - 2*h)) / (2*h)
        slope_right = (-3*v(b) + 4*v(b + h) - v(b + 2*h)) / (2*h)
        assert abs(slope_left - slope_right) < 1e-6

    def test_monotone_and_bounded(self):
        target = self.MU / THRESH.delta
        vals = [closed_threshold_value(u, self.B, self.MU, THRESH)
                for u in np.linspace(0, 12, 25)]
        assert all(0 <= v <= target for v in vals)
        assert all(a <= b + 1e-12 for a, b in zip(vals, vals[1:]))

    def test_approaches_cap(self):
        target = self.MU / THRESH.delta
        gaps = [abs(closed_threshold_value(u, self.B, self.MU, THRESH) - target)
                for u in (30.0, 100.0, 300.0)]
        assert gaps[0] > gaps[1] > gaps[2]


class TestClosedBarrier:
    B = 1.0

    def test_zero_start(self):
        assert closed_barrier_value(0.0, self.B, THRESH) == 0.0

    def test_printed_constants_agree(self):
        from jdrisk.specialfn import _barrier_constants
        _barrier_constants.cache_clear()
        with warnings.catch_warnings():
            warnings.simplefilter("error", RuntimeWarning)
            closed_barrier_value(0.5, self.B, THRESH)

    def test_reflecting_slope_is_one(self):
        b = self.B
        h = 1e-3
        v = lambda u: closed_barrier_value(u, b, THRESH)
        slope = (3*v(b) - 4*v(b - h) + v(b - 2*h)) / (2*h)
        assert abs(slope - 1.0) < 1e-4

    def test_excess_start_rejected(self):
        with pytest.raises(ValueError):
            closed_barrier_value(2.0, 1.0, THRESH)


class TestClosedFormResiduals:
    """Each closed form satisfies its governing equation pointwise."""

    def test_threshold_value_residual(self):
        from jdrisk.idesolver import residual, threshold_equation_spec
        b, mu = 2.0, 0.5
        spec = threshold_equation_spec(THRESH, None, None, b, mu, 1,
                                       lambda u: np.ones_like(np.asarray(u)))
        fn = lambda x: closed_threshold_value(float(np.atleast_1d(x)[0]), b,
                                              mu, THRESH)
        below = residual(fn, spec, np.linspace(0.05, b - 0.05, 100))
        above = residual(fn, spec, np.linspace(b + 0.05, 10.0, 100))
        assert below < 1e-6 and above < 1e-6

    def test_barrier_value_residual(self):
        from jdrisk.idesolver import residual, barrier_equation_spec
        spec = barrier_equation_spec(THRESH, None, None, 1, 1.0)
        fn = lambda x: closed_barrier_value(float(np.atleast_1d(x)[0]), 1.0,
                                            THRESH)
        assert residual(fn, spec, np.linspace(0.05, 0.95, 100)) < 1e-6
