"""Model primitives: parameters, jump-size laws, penalty functions, and the
pointwise differential / integro-differential operators of the surplus process.

The surplus follows dU = dP + U dR with premium-diffusion-claims P and an
investment return R carrying its own drift, volatility, and multiplicative
jumps; the two Brownian drivers have correlation rho.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate
from scipy.special import ndtr

__all__ = [
    "RiskParams",
    "JumpLaw",
    "PenaltyFn",
    "AssumptionsReport",
    "QuadratureError",
    "validate_model",
    "diffusion_coefficient",
    "apply_generator",
    "apply_G",
]

# quadrature policy: relative 1e-10, absolute 1e-14, unbounded supports
# truncated where the law's tail mass drops below 1e-12
QUAD_REL = 1e-10
QUAD_ABS = 1e-14
TAIL_MASS = 1e-12


class QuadratureError(RuntimeError):
    """Raised when adaptive quadrature cannot reach the requested tolerance.

    Carries the achieved absolute error estimate in ``achieved``.
    """

    def __init__(self, message: str, achieved: float):
        super().__init__(f"{message} (achieved tolerance {achieved:.3e})")
        self.achieved = achieved


def _quad(f, a, b, points=None, rel=QUAD_REL, abs_=QUAD_ABS) -> float:
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(f, a, b, epsrel=rel, epsabs=abs_, limit=400,
                                  points=points)
    # QUADPACK error estimates are conservative on merely piecewise-smooth
    # integrands; only genuinely poor results are rejected
    if err > max(1e-8, 1e-6 * abs(val)):
        raise QuadratureError(f"quadrature over [{a}, {b}] did not converge", err)
    return val


@dataclass(frozen=True)
class RiskParams:
    """Scalar model parameters.

    p: premium rate; sigma_P: surplus diffusion volatility; lambda_P: claim
    arrival intensity; r: investment drift; sigma_R: return volatility;
    lambda_R: return-jump intensity; rho: Brownian correlation; delta:
    discount force.
    """

    p: float
    sigma_P: float
    lambda_P: float
    r: float
    sigma_R: float
    lambda_R: float
    rho: float = 0.0
    delta: float = 0.0

    def __post_init__(self):
        if not -1.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must lie in [-1, 1], got {self.rho}")
        for name in ("sigma_P", "sigma_R", "lambda_P", "lambda_R", "delta"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be nonnegative, got {getattr(self, name)}")


_FAMILIES = ("exponential", "mixed_exponential", "normal", "point_mass",
             "shifted_lognormal", "empirical")

# integer codes shared with the numba kernels
_KIND_CODE = {f: i for i, f in enumerate(_FAMILIES)}


@dataclass(frozen=True)
class JumpLaw:
    """A sampleable / evaluable jump-size distribution.

    role "claim": the law of S_P, subtracted from the surplus (two-sided
    support allowed; positive values are losses, negative are gains).
    role "return": the law of S_R in the multiplicative update U -> U(1+S_R);
    its support must be contained in (-1, inf).
    """

    family: str
    role: str
    params: tuple = ()
    atoms_x: tuple = ()
    atoms_p: tuple = ()

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown jump family {self.family!r}")
        if self.role not in ("claim", "return"):
            raise ValueError(f"role must be 'claim' or 'return', got {self.role!r}")
        if self.role == "return" and float(self.cdf(-1.0)) > 0.0:
            raise ValueError(
                "return-role law has mass at or below -1; the surplus "
                "multiplier 1+S_R could become nonpositive")

    # ------------------------------------------------------------ constructors
    @staticmethod
    def exponential(mean: float, role: str = "claim") -> "JumpLaw":
        if mean <= 0:
            raise ValueError("exponential mean must be positive")
        return JumpLaw("exponential", role, (float(mean),))

    @staticmethod
    def mixed_exponential(p_down: float, mean_down: float, mean_up: float,
                          role: str = "claim") -> "JumpLaw":
        """Two-sided: +Exp(mean_down) with prob p_down, -Exp(mean_up) otherwise."""
        if not 0.0 <= p_down <= 1.0:
            raise ValueError("p_down must lie in [0, 1]")
        if mean_down <= 0 or mean_up <= 0:
            raise ValueError("component means must be positive")
        return JumpLaw("mixed_exponential", role,
                       (float(p_down), float(mean_down), float(mean_up)))

    @staticmethod
    def normal(mu: float, sigma: float, role: str = "claim") -> "JumpLaw":
        if sigma <= 0:
            raise ValueError("normal sigma must be positive")
        return JumpLaw("normal", role, (float(mu), float(sigma)))

    @staticmethod
    def point_mass(value: float, role: str = "claim") -> "JumpLaw":
        return JumpLaw("point_mass", role, (float(value),),
                       (float(value),), (1.0,))

    @staticmethod
    def shifted_lognormal(mu: float, sigma: float, role: str = "return") -> "JumpLaw":
        """1 + S distributed LogNormal(mu, sigma); support of S is (-1, inf)."""
        if sigma <= 0:
            raise ValueError("lognormal sigma must be positive")
        return JumpLaw("shifted_lognormal", role, (float(mu), float(sigma)))

    @staticmethod
    def empirical(values: Sequence[float], probs: Sequence[float],
                  role: str = "claim") -> "JumpLaw":
        v = np.asarray(values, dtype=float)
        q = np.asarray(probs, dtype=float)
        if v.shape != q.shape or v.ndim != 1 or len(v) == 0:
            raise ValueError("values and probs must be equal-length 1-d sequences")
        if np.any(q < 0) or abs(q.sum() - 1.0) > 1e-12:
            raise ValueError("probs must be nonnegative and sum to 1")
        order = np.argsort(v)
        return JumpLaw("empirical", role, (),
                       tuple(v[order]), tuple(q[order]))

    # ------------------------------------------------------------- descriptors
    def is_discrete(self) -> bool:
        return self.family in ("point_mass", "empirical")

    def support_min(self) -> float:
        if self.family == "exponential":
            return 0.0
        if self.family == "shifted_lognormal":
            return -1.0 + np.finfo(float).tiny  # open at -1
        if self.is_discrete():
            return min(self.atoms_x)
        return -math.inf

    def mean(self) -> float:
        if self.family == "exponential":
            return self.params[0]
        if self.family == "mixed_exponential":
            pd, md, mu_ = self.params
            return pd * md - (1.0 - pd) * mu_
        if self.family == "normal":
            return self.params[0]
        if self.family == "shifted_lognormal":
            m, s = self.params
            return math.exp(m + 0.5 * s * s) - 1.0
        return float(np.dot(self.atoms_x, self.atoms_p))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.family == "exponential":
            m = self.params[0]
            return np.where(x >= 0, -np.expm1(-np.maximum(x, 0.0) / m), 0.0)
        if self.family == "mixed_exponential":
            pd, md, mu_ = self.params
            neg = (1.0 - pd) * np.exp(np.minimum(x, 0.0) / mu_)
            pos = (1.0 - pd) + pd * (-np.expm1(-np.maximum(x, 0.0) / md))
            return np.where(x < 0, neg, pos)
        if self.family == "normal":
            m, s = self.params
            return ndtr((x - m) / s)
        if self.family == "shifted_lognormal":
            m, s = self.params
            out = np.zeros_like(x)
            ok = x > -1.0
            out = np.where(ok, ndtr((np.log1p(np.where(ok, x, 0.0)) - m) / s), 0.0)
            return out
        xa = np.asarray(self.atoms_x)
        pa = np.asarray(self.atoms_p)
        return (pa[None, :] * (xa[None, :] <= np.atleast_1d(x)[:, None])).sum(axis=1).reshape(x.shape)

    def pdf(self, x):
        """Density of the continuous part (discrete families raise)."""
        if self.is_discrete():
            raise ValueError(f"{self.family} law has no density")
        x = np.asarray(x, dtype=float)
        if self.family == "exponential":
            m = self.params[0]
            return np.where(x >= 0, np.exp(-np.maximum(x, 0.0) / m) / m, 0.0)
        if self.family == "mixed_exponential":
            pd, md, mu_ = self.params
            pos = pd / md * np.exp(-np.maximum(x, 0.0) / md)
            neg = (1.0 - pd) / mu_ * np.exp(np.minimum(x, 0.0) / mu_)
            return np.where(x >= 0, pos, neg)
        if self.family == "normal":
            m, s = self.params
            z = (x - m) / s
            return np.exp(-0.5 * z * z) / (s * math.sqrt(2 * math.pi))
        m, s = self.params
        out = np.zeros_like(x)
        ok = x > -1.0
        y = np.log1p(np.where(ok, x, 0.0))
        z = (y - m) / s
        dens = np.exp(-0.5 * z * z) / (s * math.sqrt(2 * math.pi) * (1.0 + np.where(ok, x, 0.0)))
        return np.where(ok, dens, 0.0)

    def partial_mean(self, x):
        """M1(x) = E[S 1{S <= x}], vectorized; used by the grid operators."""
        x = np.asarray(x, dtype=float)
        if self.family == "exponential":
            m = self.params[0]
            xp = np.maximum(x, 0.0)
            return np.where(x >= 0, m * (-np.expm1(-xp / m)) - xp * np.exp(-xp / m), 0.0)
        if self.family == "mixed_exponential":
            pd, md, mu_ = self.params
            xn = np.minimum(x, 0.0)
            neg = (1.0 - pd) * (xn - mu_) * np.exp(xn / mu_)
            xp = np.maximum(x, 0.0)
            pos_at0 = -(1.0 - pd) * mu_
            pos = pos_at0 + pd * (md * (-np.expm1(-xp / md)) - xp * np.exp(-xp / md))
            return np.where(x < 0, neg, pos)
        if self.family == "normal":
            m, s = self.params
            z = (x - m) / s
            phi = np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
            return m * ndtr(z) - s * phi
        if self.family == "shifted_lognormal":
            m, s = self.params
            ok = x > -1.0
            y = np.log1p(np.where(ok, x, 0.0))
            em = math.exp(m + 0.5 * s * s)
            val = em * ndtr((y - m - s * s) / s) - ndtr((y - m) / s)
            return np.where(ok, val, 0.0)
        xa = np.asarray(self.atoms_x)
        pa = np.asarray(self.atoms_p)
        flat = np.atleast_1d(x)
        out = ((xa * pa)[None, :] * (xa[None, :] <= flat[:, None])).sum(axis=1)
        return out.reshape(x.shape)

    def ppf(self, q: float) -> float:
        """Quantile; used to truncate unbounded supports for quadrature."""
        if self.family == "exponential":
            return -self.params[0] * math.log1p(-q)
        if self.family == "normal":
            from scipy.stats import norm
            return float(norm.ppf(q, loc=self.params[0], scale=self.params[1]))
        if self.family == "shifted_lognormal":
            from scipy.stats import norm
            return math.exp(float(norm.ppf(q, loc=self.params[0], scale=self.params[1]))) - 1.0
        if self.family == "mixed_exponential":
            pd, md, mu_ = self.params
            from scipy.optimize import brentq
            lo = -mu_ * 60.0
            hi = md * 60.0
            return float(brentq(lambda x: float(self.cdf(x)) - q, lo, hi, xtol=1e-13))
        xa = np.asarray(self.atoms_x)
        cum = np.cumsum(self.atoms_p)
        return float(xa[np.searchsorted(cum, q)])

    def sample(self, rng: np.random.Generator, size=None):
        if self.family == "exponential":
            return rng.exponential(self.params[0], size)
        if self.family == "mixed_exponential":
            pd, md, mu_ = self.params
            pick = rng.random(size) < pd
            pos = rng.exponential(md, size)
            neg = -rng.exponential(mu_, size)
            return np.where(pick, pos, neg)
        if self.family == "normal":
            return rng.normal(self.params[0], self.params[1], size)
        if self.family == "shifted_lognormal":
            m, s = self.params
            return np.exp(rng.normal(m, s, size)) - 1.0
        xa = np.asarray(self.atoms_x)
        cum = np.cumsum(self.atoms_p)
        u = rng.random(size)
        return xa[np.searchsorted(cum, u)]

    def expect(self, fn: Callable[[np.ndarray], np.ndarray],
               lo: float = -math.inf, hi: float = math.inf) -> float:
        """E[fn(S) 1{lo < S <= hi}] by atom summation or adaptive quadrature."""
        if self.is_discrete():
            xa = np.asarray(self.atoms_x)
            pa = np.asarray(self.atoms_p)
            keep = (xa > lo) & (xa <= hi)
            if not keep.any():
                return 0.0
            return float(np.sum(pa[keep] * np.asarray(fn(xa[keep]), dtype=float)))
        a = max(lo, self.ppf(TAIL_MASS))
        b = min(hi, self.ppf(1.0 - TAIL_MASS))
        if not a < b:
            return 0.0
        pts = None
        if self.family == "mixed_exponential" and a < 0.0 < b:
            pts = [0.0]
        return _quad(lambda z: float(fn(np.asarray(z))) * float(self.pdf(np.asarray(z))),
                     a, b, points=pts)

    # --------------------------------------------------- kernel encoding
    def kernel_encoding(self) -> tuple[int, np.ndarray]:
        """(kind code, parameter vector) consumed by the numba path kernels."""
        kind = _KIND_CODE[self.family]
        if self.family == "empirical":
            cum = np.cumsum(self.atoms_p)
            par = np.concatenate([[len(self.atoms_x)], self.atoms_x, cum])
        elif self.family == "point_mass":
            par = np.array([self.params[0]])
        else:
            par = np.asarray(self.params, dtype=float)
        return kind, np.ascontiguousarray(par, dtype=np.float64)


@dataclass(frozen=True)
class PenaltyFn:
    """Nonnegative bounded penalty w(x1, x2) on [0, inf)^2.

    x1 is the surplus immediately before ruin, x2 the deficit at ruin.
    Forms: "one" (w == 1, ruin probability), "overshoot_power" (w = x2^k,
    needs an explicit bound), "deficit_indicator" (w = 1{x2 <= c}), "table"
    (user-supplied bounded callable).
    """

    form: str = "one"
    k: int = 1
    c: float = 1.0
    table: Optional[Callable[[float, float], float]] = None
    bound: float = 1.0

    def __post_init__(self):
        if self.form not in ("one", "overshoot_power", "deficit_indicator", "table"):
            raise ValueError(f"unknown penalty form {self.form!r}")
        if self.form == "table" and self.table is None:
            raise ValueError("table form requires a callable")
        if self.bound <= 0:
            raise ValueError("penalty bound must be positive")

    def __call__(self, x1, x2):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        if self.form == "one":
            return np.ones(np.broadcast(x1, x2).shape)
        if self.form == "overshoot_power":
            return np.minimum(x2 ** self.k, self.bound)
        if self.form == "deficit_indicator":
            return (x2 <= self.c).astype(float)
        v = np.vectorize(self.table, otypes=[float])(x1, x2)
        return np.minimum(v, self.bound)

    def at_zero(self) -> float:
        return float(self(0.0, 0.0))

    def claim_source(self, u: float, claim_law: JumpLaw, lambda_P: float) -> float:
        """lambda_P * E[w(u, S - u) 1{S > u}]: the inhomogeneous term that

        claims overshooting the current surplus contribute to the penalty
        equations.
        """
        if lambda_P == 0.0:
            return 0.0
        if self.form == "one":
            return lambda_P * (1.0 - float(claim_law.cdf(u)))
        if self.form == "deficit_indicator":
            return lambda_P * float(claim_law.cdf(u + self.c) - claim_law.cdf(u))
        return lambda_P * claim_law.expect(lambda z: self(u, z - u), lo=u)


@dataclass(frozen=True)
class AssumptionsReport:
    """Which of the standing model hypotheses hold.

    Simulation remains valid regardless; the flags only gate the closed
    forms and the far-field boundary conditions of the grid solver.
    """

    net_profit: bool
    sigmaP_positive: bool
    FR_support_ok: bool
    drift_dominance: bool
    messages: tuple = field(default=())

    @property
    def all_ok(self) -> bool:
        return (self.net_profit and self.sigmaP_positive
                and self.FR_support_ok and self.drift_dominance)


def validate_model(params: RiskParams, claim_law: Optional[JumpLaw],
                   return_law: Optional[JumpLaw]) -> AssumptionsReport:
    """Check the standing hypotheses and report which hold.

    Raises only for structural errors (wrong roles, return law reaching -1);
    a model violating the drift or net-profit conditions is flagged, not
    rejected.
    """
    if claim_law is not None and claim_law.role != "claim":
        raise ValueError(f"claim_law has role {claim_law.role!r}, expected 'claim'")
    if return_law is not None and return_law.role != "return":
        raise ValueError(f"return_law has role {return_law.role!r}, expected 'return'")
    if params.lambda_P > 0 and claim_law is None:
        raise ValueError("lambda_P > 0 requires a claim law")
    if params.lambda_R > 0 and return_law is None:
        raise ValueError("lambda_R > 0 requires a return law")
    fr_ok = True
    if return_law is not None:
        if float(return_law.cdf(-1.0)) > 0.0:
            raise ValueError("return law has mass at or below -1")
    mean_claim = claim_law.mean() if claim_law is not None else 0.0
    msgs = []
    net = params.p - params.rho * params.sigma_P * params.sigma_R \
        - params.lambda_P * mean_claim > 0.0
    if not net:
        msgs.append("net profit condition p - rho*sigma_P*sigma_R - lambda_P*E[S_P] > 0 fails")
    sp = params.sigma_P > 0.0
    if not sp:
        msgs.append("sigma_P = 0: oscillation ruin is absent and boundary handling degenerates")
    dom = params.r - 0.5 * params.sigma_R ** 2 > 0.0
    if not dom:
        msgs.append("drift dominance r - sigma_R^2/2 > 0 fails: the surplus does not drift to +inf")
    return AssumptionsReport(net, sp, fr_ok, dom, tuple(msgs))


def diffusion_coefficient(u: float, params: RiskParams) -> float:
    """sqrt((sigma_P + rho sigma_R u)^2 + sigma_R^2 (1 - rho^2) u^2), the
    volatility of the one-Brownian representation of the surplus."""
    a = params.sigma_P + params.rho * params.sigma_R * u
    b2 = params.sigma_R ** 2 * (1.0 - params.rho ** 2) * u * u
    return math.sqrt(a * a + b2)


def _derivatives(g, dg, d2g, fd, fd_step):
    if dg is not None and d2g is not None:
        return dg, d2g
    if not fd:
        raise ValueError("supply analytic dg and d2g, or set fd=True to request "
                         "finite differences explicitly")
    h = fd_step

    def dg_(u):
        return (g(u + h) - g(u - h)) / (2.0 * h)

    def d2g_(u):
        return (g(u + h) - 2.0 * g(u) + g(u - h)) / (h * h)

    return dg_, d2g_


def apply_generator(g: Callable[[float], float], u: float, params: RiskParams,
                    claim_law: Optional[JumpLaw] = None,
                    return_law: Optional[JumpLaw] = None,
                    dg: Optional[Callable] = None, d2g: Optional[Callable] = None,
                    fd: bool = False, fd_step: float = 1e-5) -> float:
    """Infinitesimal generator of the surplus applied to a test function.

    L g(u) = a(u) g''(u) + (p + r u) g'(u)
             + lambda_P * E[g(u - S_P) - g(u)]
             + lambda_R * E[g(u + u S_R) - g(u)]
    with a(u) = (sigma_P^2 + 2 rho sigma_P sigma_R u + sigma_R^2 u^2) / 2.
    g must be defined on the whole real line (claims are two-sided).
    """
    d1, d2 = _derivatives(g, dg, d2g, fd, fd_step)
    a = 0.5 * (params.sigma_P ** 2 + 2.0 * params.rho * params.sigma_P * params.sigma_R * u
               + params.sigma_R ** 2 * u * u)
    out = a * d2(u) + (params.p + params.r * u) * d1(u)
    gu = g(u)
    if params.lambda_P > 0:
        out += params.lambda_P * claim_law.expect(
            lambda z: np.vectorize(g, otypes=[float])(u - z) - gu)
    if params.lambda_R > 0:
        out += params.lambda_R * return_law.expect(
            lambda z: np.vectorize(g, otypes=[float])(u + u * z) - gu)
    return out


def apply_G(h, u: float, params: RiskParams,
            claim_law: Optional[JumpLaw] = None,
            return_law: Optional[JumpLaw] = None,
            dh: Optional[Callable] = None, d2h: Optional[Callable] = None,
            fd: bool = False, fd_step: float = 1e-5) -> float:
    """The domain-restricted operator used by the penalty and dividend equations:

    G h(u) = a(u) h''(u) + (p + r u) h'(u)
             + lambda_P * E[h(u - S_P) 1{S_P <= u}]
             + lambda_R * E[h(u + u S_R)]

    h only ever gets evaluated at nonnegative arguments.  For a GridFunction
    candidate the derivatives default to central differences on its own
    spacing.  When h extends analytically to the whole line and the claim law
    puts no mass above u, G h(u) = L h(u) + (lambda_P + lambda_R) h(u).
    """
    from .idesolver import GridFunction  # local import, avoids a cycle

    if isinstance(h, GridFunction):
        step = h.grid.h
        fn = h

        def d1(x):
            return (fn(x + step) - fn(x - step)) / (2.0 * step)

        def d2(x):
            return (fn(x + step) - 2.0 * fn(x) + fn(x - step)) / (step * step)
    else:
        fn = h
        d1, d2 = _derivatives(h, dh, d2h, fd, fd_step)

    a = 0.5 * (params.sigma_P ** 2 + 2.0 * params.rho * params.sigma_P * params.sigma_R * u
               + params.sigma_R ** 2 * u * u)
    out = a * d2(u) + (params.p + params.r * u) * d1(u)
    if params.lambda_P > 0:
        out += params.lambda_P * claim_law.expect(
            lambda z: np.vectorize(fn, otypes=[float])(u - z), hi=u)
    if params.lambda_R > 0:
        out += params.lambda_R * return_law.expect(
            lambda z: np.vectorize(fn, otypes=[float])(u + u * z))
    return out
