"""Path simulation engines and the Monte Carlo estimators."""

import numpy as np
import pytest
from scipy import stats

from jdrisk._fastrng import (log_accuracy_probe, sample_normals,
                             sample_uniforms, sincos_accuracy_probe)
from jdrisk.model import JumpLaw, PenaltyFn, RiskParams
from jdrisk.simulate import (BarrierStrategy, SimConfig, ThresholdStrategy,
                             estimate_barrier_dividends, estimate_gerber_shiu,
                             estimate_ruin, estimate_threshold_dividends,
                             simulate_batch, simulate_path)


def params(**kw):
    base = dict(p=1.0, sigma_P=1.0, lambda_P=0.0, r=0.2, sigma_R=0.5,
                lambda_R=0.0, rho=0.0, delta=0.0)
    base.update(kw)
    return RiskParams(**base)


JUMPY = params(p=1.5, lambda_P=1.0, r=0.4, sigma_R=0.4, rho=0.2)
CLAW = JumpLaw.exponential(0.5)
RLAW = JumpLaw.shifted_lognormal(0.0, 0.1)


class TestKernelRng:
    def test_log_accuracy(self):
        rng = np.random.default_rng(3)
        xs = np.concatenate([rng.random(50000), 10.0 ** (-rng.random(20000) * 15)])
        got = log_accuracy_probe(xs)
        rel = np.abs(got - np.log(xs)) / np.abs(np.log(xs)).clip(1e-300)
        assert rel.max() < 1e-13

    def test_sincos_accuracy(self):
        us = np.random.default_rng(4).random(50000)
        sc = sincos_accuracy_probe(us)
        assert np.abs(sc[:, 0] - np.cos(2 * np.pi * us)).max() < 5e-15
        assert np.abs(sc[:, 1] - np.sin(2 * np.pi * us)).max() < 5e-15

    def test_normals_pass_ks(self):
        z = sample_normals(np.uint64(987654321), 100_000)
        assert stats.kstest(z, "norm").pvalue > 0.001

    def test_uniforms_pass_ks(self):
        u = sample_uniforms(np.uint64(13579), 100_000)
        assert stats.kstest(u, "uniform").pvalue > 0.001


class TestPathBasics:
    def test_zero_start_oscillation_ruin(self):
        cfg = SimConfig(dt=1e-3, t_max=1.0, n_paths=64, seed=5)
        batch = simulate_batch(params(), None, None, 0.0, None, cfg)
        assert batch.ruined.all()
        assert (batch.ruin_time == 0.0).all()
        assert all(batch.ruin_type_of(i) == "oscillation" for i in range(batch.n))

    def test_deterministic_growth_never_ruins(self):
        p = params(sigma_P=0.0, sigma_R=0.0, r=0.1)
        cfg = SimConfig(dt=1e-3, t_max=5.0, n_paths=8, seed=6)
        batch = simulate_batch(p, None, None, 1.0, None, cfg)
        assert not batch.ruined.any()
        assert all(batch.ruin_type_of(i) == "none" for i in range(batch.n))
        assert (batch.ruin_time == 5.0).all()

    def test_barrier_initial_lump(self):
        p = params(delta=0.1)
        cfg = SimConfig(dt=1e-3, t_max=0.5, n_paths=32, seed=7)
        batch = simulate_batch(p, None, None, 3.0, BarrierStrategy(1.0), cfg)
        assert (batch.discounted_dividends >= 2.0).all()

    def test_claim_ruin_has_positive_deficit(self):
        cfg = SimConfig(dt=1e-3, t_max=30.0, n_paths=400, seed=8)
        batch = simulate_batch(JUMPY, CLAW, None, 0.5, None, cfg)
        claim = batch.ruin_type == 1
        osc = batch.ruin_type == 2
        assert claim.any() and osc.any()
        assert (batch.deficit[claim] > 0).all()
        assert (batch.deficit[osc] == 0.0).all()
        assert (batch.surplus_before[claim] >= 0).all()

    def test_single_path_matches_batch_with_jumps(self):
        cfg = SimConfig(dt=2e-3, t_max=10.0, n_paths=50, seed=9)
        p2 = RiskParams(**{**JUMPY.__dict__, "lambda_R": 0.5})
        batch = simulate_batch(p2, CLAW, RLAW, 1.0, None, cfg)
        for i in (0, 7, 49):
            got = simulate_path(p2, CLAW, RLAW, 1.0, None, cfg, stream=i)
            assert got == batch.outcome(i)

    def test_single_path_matches_blocked_batch(self):
        # no jumps: the batch dispatches to the lane-vectorized kernel and
        # must agree with the scalar engine path for path
        cfg = SimConfig(dt=1e-3, t_max=20.0, n_paths=300, seed=10)
        batch = simulate_batch(params(rho=1.0), None, None, 1.0, None, cfg)
        for i in (0, 128, 255, 299):
            got = simulate_path(params(rho=1.0), None, None, 1.0, None, cfg,
                                stream=i)
            assert got.ruined == bool(batch.ruined[i])
            assert got.ruin_time == batch.ruin_time[i]

    def test_determinism_bitwise(self):
        cfg = SimConfig(dt=1e-3, t_max=10.0, n_paths=500, seed=11)
        b1 = simulate_batch(JUMPY, CLAW, None, 1.0, None, cfg)
        b2 = simulate_batch(JUMPY, CLAW, None, 1.0, None, cfg)
        assert np.array_equal(b1.ruin_time, b2.ruin_time)
        assert np.array_equal(b1.deficit, b2.deficit)


class TestEstimateRuin:
    def test_zero_start_split(self):
        cfg = SimConfig(dt=1e-3, t_max=2.0, n_paths=500, seed=12)
        rb = estimate_ruin(params(), None, None, 0.0, cfg)
        assert rb.psi_d.mean == pytest.approx(1.0)
        assert rb.psi_s.mean == 0.0

    def test_large_surplus_rarely_ruins(self):
        cfg = SimConfig(dt=1e-3, t_max=20.0, n_paths=400, seed=13)
        rb = estimate_ruin(params(r=0.5), None, None, 50.0, cfg)
        assert rb.psi.mean < 0.01

    def test_decomposition_exact(self):
        cfg = SimConfig(dt=1e-3, t_max=20.0, n_paths=2000, seed=14)
        rb = estimate_ruin(JUMPY, CLAW, None, 1.0, cfg)
        assert rb.psi.mean == rb.psi_s.mean + rb.psi_d.mean
        assert rb.censored_fraction == pytest.approx(1.0 - rb.psi.mean)

    def test_monotone_in_surplus_with_separated_cis(self):
        cfg = SimConfig(dt=1e-3, t_max=60.0, n_paths=4000, seed=15)
        p = params(rho=1.0)
        estimates = [estimate_ruin(p, None, None, u, cfg).psi for u in (0.5, 1.0, 2.0)]
        for a, b in zip(estimates, estimates[1:]):
            assert a.ci95[0] > b.ci95[1]  # non-overlapping, decreasing


class TestGerberShiu:
    def test_matches_ruin_exactly_for_unit_penalty(self):
        cfg = SimConfig(dt=1e-3, t_max=20.0, n_paths=3000, seed=16)
        rb = estimate_ruin(JUMPY, CLAW, None, 1.0, cfg)
        gs = estimate_gerber_shiu(JUMPY, CLAW, None, 1.0, PenaltyFn("one"), cfg)
        assert gs.phi.mean == rb.psi.mean
        assert gs.phi_s.mean == rb.psi_s.mean
        assert gs.phi_d.mean == rb.psi_d.mean

    def test_zero_start_gives_w00(self):
        w = PenaltyFn("deficit_indicator", c=0.5)
        cfg = SimConfig(dt=1e-3, t_max=2.0, n_paths=400, seed=17)
        gs = estimate_gerber_shiu(params(delta=0.3), None, None, 0.0, w, cfg)
        assert gs.phi.mean == pytest.approx(w.at_zero())

    def test_pathwise_decomposition(self):
        cfg = SimConfig(dt=1e-3, t_max=20.0, n_paths=3000, seed=18)
        p = RiskParams(**{**JUMPY.__dict__, "delta": 0.05})
        gs = estimate_gerber_shiu(p, CLAW, None, 0.5, PenaltyFn("overshoot_power", k=1, bound=50.0), cfg)
        assert gs.phi.mean == pytest.approx(gs.phi_s.mean + gs.phi_d.mean, abs=1e-15)


class TestDividends:
    def test_threshold_requires_positive_delta(self):
        cfg = SimConfig(dt=1e-3, t_max=5.0, n_paths=10, seed=19)
        with pytest.raises(ValueError):
            estimate_threshold_dividends(params(delta=0.0), None, None, 1.0,
                                         1.0, 0.5, cfg)

    def test_mgf_at_zero_is_exactly_one(self):
        p = params(delta=0.2)
        cfg = SimConfig(dt=1e-3, t_max=10.0, n_paths=500, seed=20)
        est = estimate_threshold_dividends(p, None, None, 1.0, 1.0, 0.5, cfg,
                                           k_max=1, y_grid=(0.0, 0.1))
        assert est.mgf[0].mean == 1.0
        assert est.mgf[0].stderr == 0.0

    def test_threshold_dividend_bound(self):
        p = params(delta=0.2)
        cfg = SimConfig(dt=1e-3, t_max=30.0, n_paths=2000, seed=21)
        batch = simulate_batch(p, None, None, 1.5, ThresholdStrategy(1.0, 0.5), cfg)
        d = batch.discounted_dividends
        assert (d >= 0).all()
        assert (d <= 0.5 / 0.2).all()

    def test_threshold_zero_start(self):
        p = params(delta=0.2)
        cfg = SimConfig(dt=1e-3, t_max=5.0, n_paths=300, seed=22)
        est = estimate_threshold_dividends(p, None, None, 0.0, 1.0, 0.5, cfg, k_max=1)
        assert est.moments[0].mean == 0.0

    def test_threshold_far_above_reaches_cap(self):
        p = params(r=0.5, delta=0.2)
        cfg = SimConfig(dt=1e-3, t_max=80.0, n_paths=400, seed=23)
        est = estimate_threshold_dividends(p, None, None, 50.0, 1.0, 0.5, cfg, k_max=1)
        assert est.moments[0].mean > 0.9 * (0.5 / 0.2)

    def test_barrier_zero_start(self):
        p = params(delta=0.1)
        cfg = SimConfig(dt=1e-3, t_max=5.0, n_paths=300, seed=24)
        est = estimate_barrier_dividends(p, None, None, 0.0, 1.0, cfg, k_max=1)
        assert est.moments[0].mean == 0.0


class TestSchemeAgreement:
    def test_euler_vs_exponential_exact(self):
        # the two stepping schemes target the same law; psi estimates agree
        # within 3 combined standard errors
        u = 1.0
        cfg_e = SimConfig(dt=2e-3, t_max=30.0, n_paths=8000, seed=25,
                          scheme="euler_on_2_5")
        cfg_x = SimConfig(dt=2e-3, t_max=30.0, n_paths=8000, seed=26,
                          scheme="exponential_exact_between_jumps")
        p2 = RiskParams(**{**JUMPY.__dict__, "lambda_R": 0.5})
        a = estimate_ruin(p2, CLAW, RLAW, u, cfg_e).psi
        b = estimate_ruin(p2, CLAW, RLAW, u, cfg_x).psi
        tol = 3.0 * np.hypot(a.stderr, b.stderr)
        assert abs(a.mean - b.mean) <= tol


def test_nonfinite_state_raises():
    # an explosive drift overflows; the engine reports step and time
    from jdrisk.simulate import SimulationError
    p = params(p=1e300, r=200.0, sigma_P=1.0)
    cfg = SimConfig(dt=1.0, t_max=400.0, n_paths=2, seed=27)
    with pytest.raises(SimulationError):
        simulate_batch(p, None, None, 1.0, None, cfg)
