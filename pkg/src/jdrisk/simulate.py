"""Path simulation and Monte Carlo estimators.

Replicate i draws from its own xoshiro256++ stream keyed by word i of the
master seed's SeedSequence expansion, so estimates are bit-stable under any
worker or block arrangement.  The jump-free, strategy-free ruin workload is
routed to a lane-vectorized kernel; everything else runs the general scalar
kernel.  Both engines produce identical paths for the same replicate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from . import _kernels as _k
from .model import JumpLaw, PenaltyFn, RiskParams

__all__ = [
    "SimConfig",
    "ThresholdStrategy",
    "BarrierStrategy",
    "PathOutcome",
    "PathBatch",
    "MCEstimate",
    "RuinBreakdown",
    "GerberShiuEstimate",
    "DividendEstimate",
    "SimulationError",
    "simulate_path",
    "simulate_batch",
    "estimate_ruin",
    "estimate_gerber_shiu",
    "estimate_threshold_dividends",
    "estimate_barrier_dividends",
]

_SCHEMES = {"euler_on_2_5": _k.SC_EULER,
            "exponential_exact_between_jumps": _k.SC_EXACT}

_RUIN_TYPES = {_k.RT_NONE: "none", _k.RT_CLAIM: "claim", _k.RT_OSC: "oscillation"}


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimConfig:
    dt: float
    t_max: float
    n_paths: int
    seed: int
    bridge_correction: bool = True
    scheme: str = "euler_on_2_5"

    def __post_init__(self):
        if self.dt <= 0 or self.t_max <= 0:
            raise ValueError("dt and t_max must be positive")
        if self.n_paths < 1:
            raise ValueError("n_paths must be at least 1")
        if self.scheme not in _SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; choose from {sorted(_SCHEMES)}")


@dataclass(frozen=True)
class ThresholdStrategy:
    """Dividends at constant rate mu while the surplus exceeds b."""
    b: float
    mu: float

    def __post_init__(self):
        if self.b <= 0 or self.mu <= 0:
            raise ValueError("threshold strategy needs b > 0 and mu > 0")


@dataclass(frozen=True)
class BarrierStrategy:
    """Surplus reflected at b; the excess is paid out immediately."""
    b: float

    def __post_init__(self):
        if self.b <= 0:
            raise ValueError("barrier strategy needs b > 0")


Strategy = Union[None, ThresholdStrategy, BarrierStrategy]


@dataclass(frozen=True)
class PathOutcome:
    ruined: bool
    ruin_time: float
    ruin_type: str
    surplus_before: float
    deficit: float
    discounted_dividends: float


@dataclass(frozen=True)
class PathBatch:
    """Columnar outcomes for n replicates (replicate order = array order)."""
    ruined: np.ndarray
    ruin_time: np.ndarray
    ruin_type: np.ndarray        # integer codes; see ruin_type_of
    surplus_before: np.ndarray
    deficit: np.ndarray
    discounted_dividends: np.ndarray

    @property
    def n(self) -> int:
        return len(self.ruined)

    def ruin_type_of(self, i: int) -> str:
        return _RUIN_TYPES[int(self.ruin_type[i])]

    def outcome(self, i: int) -> PathOutcome:
        return PathOutcome(bool(self.ruined[i]), float(self.ruin_time[i]),
                           self.ruin_type_of(i), float(self.surplus_before[i]),
                           float(self.deficit[i]), float(self.discounted_dividends[i]))


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    stderr: float
    n: int
    ci95: tuple

    @staticmethod
    def from_samples(x: np.ndarray) -> "MCEstimate":
        n = len(x)
        m = float(np.mean(x))
        sd = float(np.std(x, ddof=1)) if n > 1 else 0.0
        se = sd / math.sqrt(n)
        return MCEstimate(m, se, n, (m - 1.96 * se, m + 1.96 * se))

    @staticmethod
    def sum_of_parts(x: np.ndarray, mean_parts: float) -> "MCEstimate":
        """Estimate whose mean is the float sum of already-computed part
        means (keeps decomposition identities exact to the last bit) and
        whose spread comes from the combined samples."""
        n = len(x)
        sd = float(np.std(x, ddof=1)) if n > 1 else 0.0
        se = sd / math.sqrt(n)
        return MCEstimate(mean_parts, se, n,
                          (mean_parts - 1.96 * se, mean_parts + 1.96 * se))


@dataclass(frozen=True)
class RuinBreakdown:
    psi: MCEstimate
    psi_s: MCEstimate
    psi_d: MCEstimate
    censored_fraction: float


@dataclass(frozen=True)
class GerberShiuEstimate:
    phi: MCEstimate
    phi_s: MCEstimate
    phi_d: MCEstimate


@dataclass(frozen=True)
class DividendEstimate:
    moments: tuple          # MCEstimate for E[D^k], k = 1..k_max
    mgf: tuple              # MCEstimate for E[exp(y D)] per requested y
    y_grid: tuple


def _replicate_seeds(seed: int, n: int) -> np.ndarray:
    return np.random.SeedSequence(seed).generate_state(n, np.uint64)


def _law_encoding(law: Optional[JumpLaw]):
    if law is None:
        return -1, np.zeros(1)
    return law.kernel_encoding()


def _strategy_encoding(strategy: Strategy):
    if strategy is None:
        return _k.ST_NONE, 0.0, 0.0
    if isinstance(strategy, ThresholdStrategy):
        return _k.ST_THRESHOLD, strategy.b, strategy.mu
    if isinstance(strategy, BarrierStrategy):
        return _k.ST_BARRIER, strategy.b, 0.0
    raise TypeError(f"unknown strategy {strategy!r}")


def simulate_batch(params: RiskParams, claim_law: Optional[JumpLaw],
                   return_law: Optional[JumpLaw], u: float,
                   strategy: Strategy, config: SimConfig) -> PathBatch:
    """Simulate config.n_paths independent replicates started at surplus u."""
    if u < 0:
        raise ValueError("initial surplus must be nonnegative")
    if params.lambda_P > 0 and claim_law is None:
        raise ValueError("lambda_P > 0 requires a claim law")
    if params.lambda_R > 0 and return_law is None:
        raise ValueError("lambda_R > 0 requires a return law")
    n = config.n_paths
    seeds = _replicate_seeds(config.seed, n)
    no_jumps = params.lambda_P == 0.0 and params.lambda_R == 0.0

    if no_jumps and strategy is None and config.scheme == "euler_on_2_5":
        ruined = np.zeros(n, np.uint8)
        rtime = np.zeros(n)
        errflag = np.zeros(n, np.uint8)
        errtime = np.zeros(n)
        _k.run_ruin_blocked(seeds, u, params.p, params.sigma_P, params.r,
                            params.sigma_R, params.rho, config.dt, config.t_max,
                            config.bridge_correction, _k.BLOCK_LANES, ruined,
                            rtime, errflag, errtime)
        if errflag.any():
            i = int(np.argmax(errflag))
            raise SimulationError(
                f"non-finite surplus in replicate {i} at t={errtime[i]:.6g} "
                f"(step size {config.dt})")
        rtype = np.where(ruined == 1, _k.RT_OSC, _k.RT_NONE).astype(np.int8)
        zeros = np.zeros(n)
        return PathBatch(ruined, rtime, rtype, zeros, zeros.copy(), zeros.copy())

    ckind, cpar = _law_encoding(claim_law)
    rkind, rpar = _law_encoding(return_law)
    strat, b, mu = _strategy_encoding(strategy)
    ruined = np.zeros(n, np.uint8)
    rtime = np.zeros(n)
    rtype = np.zeros(n, np.int8)
    sbefore = np.zeros(n)
    deficit = np.zeros(n)
    divs = np.zeros(n)
    errflag = np.zeros(n, np.uint8)
    errtime = np.zeros(n)
    _k.run_paths(seeds, u, params.p, params.sigma_P, params.lambda_P,
                 params.r, params.sigma_R, params.lambda_R, params.rho,
                 params.delta, ckind, cpar, rkind, rpar, strat, b, mu,
                 _SCHEMES[config.scheme], config.dt, config.t_max,
                 config.bridge_correction, ruined, rtime, rtype, sbefore,
                 deficit, divs, errflag, errtime)
    if errflag.any():
        i = int(np.argmax(errflag))
        raise SimulationError(
            f"non-finite surplus in replicate {i} at t={errtime[i]:.6g} "
            f"(step size {config.dt})")
    return PathBatch(ruined, rtime, rtype, sbefore, deficit, divs)


def simulate_path(params: RiskParams, claim_law: Optional[JumpLaw],
                  return_law: Optional[JumpLaw], u: float,
                  strategy: Strategy, config: SimConfig,
                  stream: int = 0) -> PathOutcome:
    """One replicate started at surplus u, using replicate ``stream``'s RNG.

    The outcome equals replicate ``stream`` of a batch run with the same
    seed and model, whichever engine the batch dispatches to.
    """
    if stream < 0 or stream >= config.n_paths:
        raise ValueError("stream must index a replicate in [0, n_paths)")
    if u < 0:
        raise ValueError("initial surplus must be nonnegative")
    seeds = _replicate_seeds(config.seed, config.n_paths)[stream:stream + 1]
    ckind, cpar = _law_encoding(claim_law)
    rkind, rpar = _law_encoding(return_law)
    strat, b, mu = _strategy_encoding(strategy)
    ruined = np.zeros(1, np.uint8)
    rtime = np.zeros(1)
    rtype = np.zeros(1, np.int8)
    sbefore = np.zeros(1)
    deficit = np.zeros(1)
    divs = np.zeros(1)
    errflag = np.zeros(1, np.uint8)
    errtime = np.zeros(1)
    _k.run_paths(seeds, u, params.p, params.sigma_P, params.lambda_P,
                 params.r, params.sigma_R, params.lambda_R, params.rho,
                 params.delta, ckind, cpar, rkind, rpar, strat, b, mu,
                 _SCHEMES[config.scheme], config.dt, config.t_max,
                 config.bridge_correction, ruined, rtime, rtype, sbefore,
                 deficit, divs, errflag, errtime)
    if errflag[0]:
        raise SimulationError(f"non-finite surplus at t={errtime[0]:.6g}")
    batch = PathBatch(ruined, rtime, rtype, sbefore, deficit, divs)
    return batch.outcome(0)


def estimate_ruin(params: RiskParams, claim_law: Optional[JumpLaw],
                  return_law: Optional[JumpLaw], u: float,
                  config: SimConfig) -> RuinBreakdown:
    """Ruin probability split by cause; the horizon censors, so the estimate
    is a lower bound and the censored fraction is reported alongside."""
    batch = simulate_batch(params, claim_law, return_law, u, None, config)
    ruined = batch.ruined.astype(float)
    by_claim = (batch.ruin_type == _k.RT_CLAIM).astype(float)
    by_osc = (batch.ruin_type == _k.RT_OSC).astype(float)
    psi_s = MCEstimate.from_samples(by_claim)
    psi_d = MCEstimate.from_samples(by_osc)
    return RuinBreakdown(
        psi=MCEstimate.sum_of_parts(ruined, psi_s.mean + psi_d.mean),
        psi_s=psi_s,
        psi_d=psi_d,
        censored_fraction=float(1.0 - ruined.mean()),
    )


def estimate_gerber_shiu(params: RiskParams, claim_law: Optional[JumpLaw],
                         return_law: Optional[JumpLaw], u: float,
                         penalty: PenaltyFn, config: SimConfig) -> GerberShiuEstimate:
    """Expected discounted penalty at ruin, split by ruin cause.

    phi = E[exp(-delta T) w(U_{T-}, |U_T|); T finite]; oscillation ruin
    contributes w(0, 0).  The identity phi = phi_s + phi_d holds per path.
    """
    batch = simulate_batch(params, claim_law, return_law, u, None, config)
    disc = np.exp(-params.delta * batch.ruin_time)
    w = penalty(batch.surplus_before, batch.deficit)
    claim_mask = batch.ruin_type == _k.RT_CLAIM
    osc_mask = batch.ruin_type == _k.RT_OSC
    phi_s_arr = np.where(claim_mask, disc * w, 0.0)
    phi_d_arr = np.where(osc_mask, disc * penalty.at_zero(), 0.0)
    phi_s = MCEstimate.from_samples(phi_s_arr)
    phi_d = MCEstimate.from_samples(phi_d_arr)
    return GerberShiuEstimate(
        phi=MCEstimate.sum_of_parts(phi_s_arr + phi_d_arr,
                                    phi_s.mean + phi_d.mean),
        phi_s=phi_s,
        phi_d=phi_d,
    )


def _dividend_summary(batch: PathBatch, k_max: int,
                      y_grid: Sequence[float]) -> DividendEstimate:
    d = batch.discounted_dividends
    moments = tuple(MCEstimate.from_samples(d ** k) for k in range(1, k_max + 1))
    mgf = tuple(MCEstimate.from_samples(np.exp(y * d)) for y in y_grid)
    return DividendEstimate(moments, mgf, tuple(float(y) for y in y_grid))


def estimate_threshold_dividends(params: RiskParams, claim_law: Optional[JumpLaw],
                                 return_law: Optional[JumpLaw], u: float,
                                 b: float, mu: float, config: SimConfig,
                                 k_max: int = 2,
                                 y_grid: Sequence[float] = (0.0,)) -> DividendEstimate:
    """Moments and MGF of total discounted dividends under a threshold strategy."""
    if params.delta <= 0:
        raise ValueError("threshold dividends need delta > 0; the present "
                         "value may diverge otherwise")
    batch = simulate_batch(params, claim_law, return_law, u,
                           ThresholdStrategy(b, mu), config)
    return _dividend_summary(batch, k_max, y_grid)


def estimate_barrier_dividends(params: RiskParams, claim_law: Optional[JumpLaw],
                               return_law: Optional[JumpLaw], u: float,
                               b: float, config: SimConfig, k_max: int = 2,
                               y_grid: Sequence[float] = (0.0,)) -> DividendEstimate:
    """Moments and MGF of total discounted dividends under a barrier strategy."""
    if params.delta <= 0:
        raise ValueError("barrier dividends need delta > 0")
    batch = simulate_batch(params, claim_law, return_law, u,
                           BarrierStrategy(b), config)
    return _dividend_summary(batch, k_max, y_grid)
