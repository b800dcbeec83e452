"""Built-in verification scenarios: each runs every applicable method
(Monte Carlo, closed form, grid solver) on one model and compares the
routes pairwise, with 3 combined standard errors for stochastic pairs and
1e-3 sup-norm for deterministic pairs."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .idesolver import Grid, gerber_equation_spec, solve_barrier_moments, \
    solve_gerber_ide, solve_linear_bvp, solve_threshold_moments
from .model import JumpLaw, PenaltyFn, RiskParams
from .simulate import SimConfig, estimate_barrier_dividends, estimate_gerber_shiu, \
    estimate_ruin, estimate_threshold_dividends
from .specialfn import closed_barrier_value, closed_gerber_no_jumps, \
    closed_ruin_rho1, closed_threshold_value

__all__ = ["Comparison", "ResultRow", "CrosscheckReport", "SCENARIOS",
           "run_scenario", "scenario_names"]

MC_SIGMAS = 3.0
DETERMINISTIC_TOL = 1e-3


@dataclass(frozen=True)
class Comparison:
    quantity: str
    method_a: str
    value_a: float
    method_b: str
    value_b: float
    gap: float
    tol: float
    passed: bool


@dataclass(frozen=True)
class ResultRow:
    u: float
    value: float
    uncertainty: float
    method: str
    quantity: str
    n_or_grid: int


@dataclass(frozen=True)
class CrosscheckReport:
    scenario: str
    rows: tuple
    comparisons: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.comparisons)


def _mc_pair(quantity, name_a, est, name_b, value_b, stderr_b=0.0,
             sigmas=MC_SIGMAS) -> Comparison:
    tol = sigmas * math.hypot(est.stderr, stderr_b)
    gap = abs(est.mean - value_b)
    return Comparison(quantity, name_a, est.mean, name_b, value_b, gap, tol,
                      gap <= tol)


def _det_pair(quantity, name_a, value_a, name_b, value_b,
              tol=DETERMINISTIC_TOL) -> Comparison:
    gap = abs(value_a - value_b)
    return Comparison(quantity, name_a, value_a, name_b, value_b, gap, tol,
                      gap <= tol)


def _scenario_ruin_corr1(n_paths: int, seed: int, grid_n: int,
                         u_max: float) -> CrosscheckReport:
    """Jump-free ruin with perfectly correlated drivers: Monte Carlo against
    the scale-function quadrature, plus two-rule quadrature stability."""
    params = RiskParams(p=1.0, sigma_P=1.0, lambda_P=0.0, r=0.2, sigma_R=0.5,
                        lambda_R=0.0, rho=1.0, delta=0.0)
    cfg = SimConfig(dt=1e-3, t_max=200.0, n_paths=n_paths, seed=seed,
                    bridge_correction=True)
    rows, comps = [], []
    for u in (0.5, 1.0, 2.0):
        closed = closed_ruin_rho1(u, params)
        closed_b = closed_ruin_rho1(u, params, rule="composite", panels=64)
        closed_c = closed_ruin_rho1(u, params, rule="composite", panels=128)
        rb = estimate_ruin(params, None, None, u, cfg)
        rows.append(ResultRow(u, rb.psi.mean, rb.psi.stderr, "mc", "psi", n_paths))
        rows.append(ResultRow(u, closed, abs(closed - closed_c), "closed", "psi", 0))
        comps.append(_mc_pair(f"psi({u})", "mc", rb.psi, "closed", closed))
        comps.append(_det_pair(f"psi({u}) two-rule", "quad-adaptive", closed,
                               "quad-composite-64", closed_b, tol=1e-9))
        comps.append(_det_pair(f"psi({u}) two-rule-2x", "quad-adaptive", closed,
                               "quad-composite-128", closed_c, tol=1e-9))
    return CrosscheckReport("ruin-diffusion-corr1", tuple(rows), tuple(comps))


def _scenario_ruin_partial_corr(n_paths: int, seed: int, grid_n: int,
                                u_max: float) -> CrosscheckReport:
    """Jump-free ruin at |rho| < 1: boundary-value solve against Monte
    Carlo, and an O(h^2) self-convergence order check."""
    rows, comps = [], []
    for j, rho in enumerate((0.0, 0.5)):
        params = RiskParams(p=1.0, sigma_P=1.0, lambda_P=0.0, r=0.5,
                            sigma_R=0.5, lambda_R=0.0, rho=rho, delta=0.0)
        spec = gerber_equation_spec(params, None, None, PenaltyFn("one"), "phi")
        grid = Grid(u_max, grid_n)
        sol = solve_linear_bvp(spec, grid)
        cfg = SimConfig(dt=1e-3, t_max=60.0, n_paths=n_paths, seed=seed + j)
        for u in (0.5, 1.0, 2.0):
            rb = estimate_ruin(params, None, None, u, cfg)
            bvp = float(sol(u))
            rows.append(ResultRow(u, rb.psi.mean, rb.psi.stderr, "mc",
                                  f"psi[rho={rho}]", n_paths))
            rows.append(ResultRow(u, bvp, 0.0, "ide", f"psi[rho={rho}]", grid_n))
            comps.append(_mc_pair(f"psi({u})[rho={rho}]", "mc", rb.psi, "bvp", bvp))
        # self-convergence: common coarse nodes across three refinements
        n0 = 376
        sols = [solve_linear_bvp(spec, Grid(u_max, (n0 - 1) * 2 ** k + 1))
                for k in range(3)]
        probes = Grid(u_max, n0).nodes
        d1 = float(np.max(np.abs(sols[0](probes) - sols[1](probes))))
        d2 = float(np.max(np.abs(sols[1](probes) - sols[2](probes))))
        ratio = d1 / d2
        comps.append(Comparison(f"h^2 order[rho={rho}]", "coarse/fine", ratio,
                                "expected", 4.0, abs(ratio - 4.0), 0.5,
                                3.5 <= ratio <= 4.5))
    return CrosscheckReport("ruin-diffusion-partial-corr", tuple(rows),
                            tuple(comps))


def _scenario_penalty_no_jumps(n_paths: int, seed: int, grid_n: int,
                               u_max: float) -> CrosscheckReport:
    """Discounted penalty (w == 1, delta > r) without jumps: closed form
    against a large-domain boundary-value solve and Monte Carlo.  The far
    field decays like a slow power here, so the solve runs on a very long
    truncated domain."""
    params = RiskParams(p=1.0, sigma_P=1.0, lambda_P=0.0, r=0.05, sigma_R=0.5,
                        lambda_R=0.0, rho=0.3, delta=0.1)
    spec = gerber_equation_spec(params, None, None, PenaltyFn("one"), "phi")
    sol = solve_linear_bvp(spec, Grid(u_max, grid_n))
    cfg = SimConfig(dt=1e-3, t_max=100.0, n_paths=n_paths, seed=seed)
    rows, comps = [], []
    comps.append(_det_pair("phi(0)", "closed", closed_gerber_no_jumps(0.0, params),
                           "boundary", 1.0, tol=1e-12))
    sup = 0.0
    for u in np.concatenate([np.linspace(0.0, 20.0, 21), (50.0, 200.0, 1000.0)]):
        sup = max(sup, abs(float(sol(u)) - closed_gerber_no_jumps(float(u), params)))
    comps.append(Comparison("sup|bvp - closed|", "bvp", sup, "closed", 0.0,
                            sup, DETERMINISTIC_TOL, sup <= DETERMINISTIC_TOL))
    for u in (0.5, 1.0, 2.0):
        closed = closed_gerber_no_jumps(u, params)
        est = estimate_gerber_shiu(params, None, None, u, PenaltyFn("one"), cfg)
        rows.append(ResultRow(u, est.phi.mean, est.phi.stderr, "mc", "phi", n_paths))
        rows.append(ResultRow(u, closed, 0.0, "closed", "phi", 0))
        rows.append(ResultRow(u, float(sol(u)), 0.0, "ide", "phi", 200001))
        comps.append(_mc_pair(f"phi({u})", "mc", est.phi, "closed", closed))
    return CrosscheckReport("discounted-penalty-no-jumps", tuple(rows), tuple(comps))


def _scenario_threshold_no_jumps(n_paths: int, seed: int, grid_n: int,
                                 u_max: float) -> CrosscheckReport:
    """Threshold dividend value, no jumps: closed form vs grid solve vs MC.
    delta is chosen large enough that the far field decays fast and the
    truncated solve matches the closed form over the whole grid."""
    params = RiskParams(p=1.0, sigma_P=1.0, lambda_P=0.0, r=0.05, sigma_R=0.5,
                        lambda_R=0.0, rho=0.0, delta=0.5)
    b, mu = 2.0, 0.5
    grid = Grid(u_max, grid_n)
    res = solve_threshold_moments(params, None, None, b, mu, 1, grid)
    v1 = res.functions[0]
    cfg = SimConfig(dt=1e-3, t_max=40.0, n_paths=n_paths, seed=seed)
    rows, comps = [], []
    sup = 0.0
    probe_far = [x for x in (20.0, 50.0, 100.0, 150.0) if x <= grid.u_max]
    for u in np.concatenate([np.linspace(0.0, 10.0, 21), probe_far]):
        sup = max(sup, abs(float(v1(u)) - closed_threshold_value(float(u), b, mu, params)))
    comps.append(Comparison("sup|ide - closed|", "ide", sup, "closed", 0.0,
                            sup, DETERMINISTIC_TOL, sup <= DETERMINISTIC_TOL))
    for u in (0.5, b, 2 * b):
        closed = closed_threshold_value(u, b, mu, params)
        est = estimate_threshold_dividends(params, None, None, u, b, mu, cfg,
                                           k_max=1)
        rows.append(ResultRow(u, est.moments[0].mean, est.moments[0].stderr,
                              "mc", "V1", n_paths))
        rows.append(ResultRow(u, closed, 0.0, "closed", "V1", 0))
        rows.append(ResultRow(u, float(v1(u)), res.residuals[0], "ide", "V1",
                              grid.n))
        comps.append(_mc_pair(f"V1({u})", "mc", est.moments[0], "closed", closed))
    return CrosscheckReport("threshold-dividends-no-jumps", tuple(rows),
                            tuple(comps))


def _scenario_barrier_no_jumps(n_paths: int, seed: int, grid_n: int,
                               u_max: float) -> CrosscheckReport:
    """Barrier dividend value at rho = 0, no jumps: all three routes."""
    params = RiskParams(p=1.0, sigma_P=1.0, lambda_P=0.0, r=0.05, sigma_R=0.5,
                        lambda_R=0.0, rho=0.0, delta=0.1)
    b = 1.0
    grid = Grid(b, grid_n)
    res = solve_barrier_moments(params, None, None, b, 1, grid)
    v1 = res.functions[0]
    cfg = SimConfig(dt=1e-3, t_max=120.0, n_paths=n_paths, seed=seed)
    rows, comps = [], []
    sup = 0.0
    for u in np.linspace(0.0, b, 21):
        sup = max(sup, abs(float(v1(u)) - closed_barrier_value(float(u), b, params)))
    comps.append(Comparison("sup|ide - closed|", "ide", sup, "closed", 0.0,
                            sup, DETERMINISTIC_TOL, sup <= DETERMINISTIC_TOL))
    for u in (0.5, b):
        closed = closed_barrier_value(u, b, params)
        est = estimate_barrier_dividends(params, None, None, u, b, cfg, k_max=1)
        rows.append(ResultRow(u, est.moments[0].mean, est.moments[0].stderr,
                              "mc", "Vbar1", n_paths))
        rows.append(ResultRow(u, closed, 0.0, "closed", "Vbar1", 0))
        rows.append(ResultRow(u, float(v1(u)), res.residuals[0], "ide", "Vbar1",
                              grid.n))
        comps.append(_mc_pair(f"Vbar1({u})", "mc", est.moments[0], "closed", closed))
        comps.append(_mc_pair(f"Vbar1({u})", "mc", est.moments[0], "ide",
                              float(v1(u))))
        comps.append(_det_pair(f"Vbar1({u})", "ide", float(v1(u)), "closed", closed))
    return CrosscheckReport("barrier-dividends-no-jumps", tuple(rows), tuple(comps))


def _scenario_penalty_with_jumps(n_paths: int, seed: int, grid_n: int,
                                 u_max: float) -> CrosscheckReport:
    """Ruin probability with exponential claims, with and without lognormal
    return jumps: the grid solver against Monte Carlo at five surpluses."""
    claw = JumpLaw.exponential(0.5)
    rlaw = JumpLaw.shifted_lognormal(0.0, 0.1)
    rows, comps = [], []
    for j, lam_r in enumerate((0.0, 0.5)):
        params = RiskParams(p=1.5, sigma_P=1.0, lambda_P=1.0, r=0.4,
                            sigma_R=0.4, lambda_R=lam_r, rho=0.2, delta=0.0)
        rl = rlaw if lam_r > 0 else None
        sol = solve_gerber_ide(params, claw, rl, PenaltyFn("one"), "phi",
                               Grid(u_max, grid_n))
        cfg = SimConfig(dt=1e-3, t_max=60.0, n_paths=n_paths, seed=seed + j)
        tag = f"[lamR={lam_r}]"
        for u in (0.5, 1.0, 2.0, 3.0, 5.0):
            rb = estimate_ruin(params, claw, rl, u, cfg)
            ide = float(sol.solution(u))
            rows.append(ResultRow(u, rb.psi.mean, rb.psi.stderr, "mc",
                                  f"psi{tag}", n_paths))
            rows.append(ResultRow(u, ide, sol.residual, "ide", f"psi{tag}", grid_n))
            comps.append(_mc_pair(f"psi({u}){tag}", "mc", rb.psi, "ide", ide))
    return CrosscheckReport("penalty-with-jumps", tuple(rows), tuple(comps))


SCENARIOS: dict = {
    "ruin-diffusion-corr1": (_scenario_ruin_corr1,
                             dict(n_paths=100000, seed=20240901, grid_n=2001,
                                  u_max=20.0)),
    "ruin-diffusion-partial-corr": (_scenario_ruin_partial_corr,
                                    dict(n_paths=30000, seed=20240902,
                                         grid_n=3001, u_max=30.0)),
    "discounted-penalty-no-jumps": (_scenario_penalty_no_jumps,
                                    dict(n_paths=40000, seed=20240903,
                                         grid_n=200001, u_max=4000.0)),
    "threshold-dividends-no-jumps": (_scenario_threshold_no_jumps,
                                     dict(n_paths=30000, seed=20240904,
                                          grid_n=7501, u_max=150.0)),
    "barrier-dividends-no-jumps": (_scenario_barrier_no_jumps,
                                   dict(n_paths=30000, seed=20240905,
                                        grid_n=1001, u_max=1.0)),
    "penalty-with-jumps": (_scenario_penalty_with_jumps,
                           dict(n_paths=25000, seed=20240906, grid_n=1501,
                                u_max=30.0)),
}


def scenario_names() -> list:
    return sorted(SCENARIOS)


def run_scenario(name: str, n_paths: Optional[int] = None,
                 seed: Optional[int] = None, grid_n: Optional[int] = None,
                 u_max: Optional[float] = None) -> CrosscheckReport:
    """Run one named verification scenario, optionally overriding the
    replicate count, seed, or grid geometry."""
    if name not in SCENARIOS:
        raise KeyError(f"unknown crosscheck scenario {name!r}; "
                       f"available: {', '.join(scenario_names())}")
    fn, defaults = SCENARIOS[name]
    kw = dict(defaults)
    if n_paths is not None:
        kw["n_paths"] = int(n_paths)
    if seed is not None:
        kw["seed"] = int(seed)
    if grid_n is not None:
        kw["grid_n"] = int(grid_n)
    if u_max is not None:
        kw["u_max"] = float(u_max)
    return fn(**kw)
