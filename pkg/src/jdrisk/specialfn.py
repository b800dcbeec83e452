"""Quadrature-backed special functions and the closed-form solutions for the
jump-free model: ruin probability at |rho| = 1, the discounted penalty with
delta > r, and threshold / barrier dividend values.

The D and E integral family solves the canonical equation

    (sigma_P^2 + sigma_R^2 x^2)/2 h'' + (c + r x) h' = delta h.

The correlated model reduces to this form after shifting the surplus by
rho sigma_P / sigma_R, which rescales the constant slots: the caller passes
sigma_P sqrt(1 - rho^2) for sigma_P and p - r rho sigma_P / sigma_R for c
(minus the dividend rate above a threshold).  DEParams carries the constants
of the canonical equation, not the raw model parameters.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate

from .model import QuadratureError, RiskParams

__all__ = [
    "AlphaBeta",
    "DEParams",
    "alpha_beta",
    "canonical_de_params",
    "eval_D",
    "eval_E",
    "eval_DE",
    "de_derivative_check",
    "eval_K",
    "k_infinity",
    "closed_ruin_rho1",
    "closed_gerber_no_jumps",
    "closed_threshold_value",
    "closed_barrier_value",
]

_QUAD_OPTS = dict(epsabs=1e-14, epsrel=1e-12, limit=400)


@dataclass(frozen=True)
class AlphaBeta:
    alpha: float
    beta: float


def alpha_beta(delta: float, r: float, sigma_R: float) -> AlphaBeta:
    """Exponents of the canonical equation's solution family.

    beta = sqrt((2r/sigma_R^2 - 1)^2 + 8 delta/sigma_R^2) - 1 and
    alpha = (sqrt(...) - (1 + 2r/sigma_R^2)) / 2; beta = 2 alpha + 2r/sigma_R^2.
    Both are positive when delta > r.
    """
    if sigma_R <= 0:
        raise ValueError("alpha/beta are undefined for sigma_R = 0")
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    a = 2.0 * r / sigma_R ** 2
    disc = math.sqrt((a - 1.0) ** 2 + 8.0 * delta / sigma_R ** 2)
    return AlphaBeta(alpha=0.5 * (disc - (1.0 + a)), beta=disc - 1.0)


@dataclass(frozen=True)
class DEParams:
    """Constants of the canonical equation: drift c + r x, diffusion
    (sigma_P^2 + sigma_R^2 x^2)/2, discount delta."""
    c: float
    sigma_P: float
    sigma_R: float
    r: float
    delta: float

    def __post_init__(self):
        if self.sigma_P <= 0 or self.sigma_R <= 0:
            raise ValueError("DEParams needs sigma_P > 0 and sigma_R > 0")

    @property
    def ab(self) -> AlphaBeta:
        return alpha_beta(self.delta, self.r, self.sigma_R)


def canonical_de_params(params: RiskParams, mu: float = 0.0) -> DEParams:
    """Map model parameters to the canonical constants (|rho| < 1 only)."""
    if params.rho ** 2 >= 1.0:
        raise ValueError("the D/E reduction needs rho^2 < 1")
    sig = params.sigma_P * math.sqrt(1.0 - params.rho ** 2)
    c = params.p - mu - params.r * params.rho * params.sigma_P / params.sigma_R
    return DEParams(c=c, sigma_P=sig, sigma_R=params.sigma_R,
                    r=params.r, delta=params.delta)


def _quad_silent(f, a, b, what: str) -> float:
    """Adaptive quadrature; QUADPACK roundoff chatter is silenced and the
    achieved-error estimate is checked instead."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(f, a, b, **_QUAD_OPTS)
    if err > max(1e-11, 1e-8 * abs(val)):
        raise QuadratureError(f"{what} quadrature did not converge", err)
    return val


def _tanh_sinh(f, a: float, b: float, n: int = 160) -> float:
    """Fixed-node double-exponential (tanh-sinh) rule on (a, b): a composite
    trapezoid in the transformed variable whose nodes crowd the endpoints, so
    integrable algebraic endpoint singularities converge spectrally.  Serves
    as the independent second quadrature route."""
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    hstep = 6.0 / n
    k = np.arange(-n, n + 1)
    t = k * hstep
    sh = 0.5 * math.pi * np.sinh(t)
    x = np.tanh(sh)
    w = (0.5 * math.pi * np.cosh(t)) / np.cosh(sh) ** 2 * hstep
    nodes = mid + half * x
    inside = (nodes > a) & (nodes < b) & (w > 0.0)
    return half * float(np.sum(w[inside] * f(nodes[inside])))


def _de_pieces(x: float, lam: float, de: DEParams, upper: bool):
    """Split the D (upper=True) or E integral into a plain inner piece and a
    substituted endpoint piece.

    The cosine endpoint gets the change of variable t = pi/2 - s^m (mirror
    for E), with the trig factors written in the endpoint distance s^m
    directly: evaluating cos(t) at arguments near +-pi/2 would otherwise
    cancel catastrophically exactly where the integrand is singular.  The
    power m grows as beta - lam approaches -1 so the transformed integrand
    stays several times differentiable.
    Returns ((g_plain, a, b), (g_sub, 0, s1)) or None for an empty interval.
    """
    beta = de.ab.beta
    gam = beta - lam
    if gam <= -1.0:
        raise ValueError(
            f"divergent endpoint: beta - lam = {gam:.6g} <= -1 "
            f"(beta = {beta:.6g}, lam = {lam:.6g})")
    sp, sr, c = de.sigma_P, de.sigma_R, de.c
    theta = math.atan2(sr * x, sp)
    expo = -2.0 * c / (sp * sr)
    half_pi = 0.5 * math.pi
    # transformed endpoint behaviour is s^(m(1+gam)-1); keep the exponent >= 3
    m = max(2, math.ceil(4.0 / (1.0 + gam)))
    mf = float(m)

    if upper:
        lo, hi = theta, half_pi
        if hi - lo <= 0:
            return None
        mid = 0.5 * (lo + hi)

        def g_plain(t):
            t = np.asarray(t, dtype=float)
            base = np.maximum(sp * np.sin(t) - sr * x * np.cos(t), 0.0)
            return np.cos(t) ** gam * base ** lam * np.exp(expo * t)

        s1 = (hi - mid) ** (1.0 / mf)

        def g_sub(s):
            s = np.asarray(s, dtype=float)
            d = s ** m                      # distance to pi/2
            cost = np.sin(d)
            sint = np.cos(d)
            base = np.maximum(sp * sint - sr * x * cost, 0.0)
            return (cost ** gam * base ** lam * np.exp(expo * (half_pi - d))
                    * mf * s ** (m - 1))

        return (g_plain, lo, mid), (g_sub, 0.0, s1)

    lo, hi = -half_pi, theta
    if hi - lo <= 0:
        return None
    mid = 0.5 * (lo + hi)

    def g_plain(t):
        t = np.asarray(t, dtype=float)
        base = np.maximum(sr * x * np.cos(t) - sp * np.sin(t), 0.0)
        return np.cos(t) ** gam * base ** lam * np.exp(expo * t)

    s1 = (mid - lo) ** (1.0 / mf)

    def g_sub(s):
        s = np.asarray(s, dtype=float)
        d = s ** m                          # distance to -pi/2
        cost = np.sin(d)
        sint = -np.cos(d)
        base = np.maximum(sr * x * cost - sp * sint, 0.0)
        return (cost ** gam * base ** lam * np.exp(expo * (d - half_pi))
                * mf * s ** (m - 1))

    return (g_sub, 0.0, s1), (g_plain, mid, hi)


def _de_integral_adaptive(x: float, lam: float, de: DEParams, upper: bool) -> float:
    """Adaptive quadrature of the two pieces; falls back to the fixed
    double-exponential rule when the adaptive error estimate is poor
    (degenerate intervals at extreme arguments)."""
    pieces = _de_pieces(x, lam, de, upper)
    if pieces is None:
        return 0.0
    total = 0.0
    try:
        for fn, a, b in pieces:
            total += _quad_silent(fn, a, b, "D piece" if upper else "E piece")
    except QuadratureError:
        total = 0.0
        for fn, a, b in pieces:
            total += _tanh_sinh(fn, a, b, n=256)
    return total


def _gl_panels(f, a: float, b: float, panels: int, nodes: int = 12) -> float:
    xg, wg = leggauss(nodes)
    edges = np.linspace(a, b, panels + 1)
    total = 0.0
    for k in range(panels):
        lo, hi = edges[k], edges[k + 1]
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        total += half * float(np.sum(wg * f(mid + half * xg)))
    return total


def _de_integral_composite(x: float, lam: float, de: DEParams, upper: bool,
                           panels: int = 96) -> float:
    """Independent fixed-rule evaluation: tanh-sinh (2*panels+1 nodes) on
    each piece; endpoint clustering absorbs the remaining singularity and
    the rule's error varies smoothly in x."""
    pieces = _de_pieces(x, lam, de, upper)
    if pieces is None:
        return 0.0
    return sum(_tanh_sinh(fn, a, b, n=panels) for fn, a, b in pieces)


def _norm(lam: float, de: DEParams) -> float:
    return de.sigma_P ** (1.0 + de.ab.beta) * de.sigma_R ** (1.0 + lam)


def eval_D(x: float, lam: float, de: DEParams, rule: str = "adaptive",
           panels: int = 96) -> float:
    if rule == "adaptive":
        val = _de_integral_adaptive(x, lam, de, upper=True)
    elif rule == "composite":
        val = _de_integral_composite(x, lam, de, upper=True, panels=panels)
    else:
        raise ValueError(f"unknown rule {rule!r}")
    return val / _norm(lam, de)


def eval_E(x: float, lam: float, de: DEParams, rule: str = "adaptive",
           panels: int = 96) -> float:
    if rule == "adaptive":
        val = _de_integral_adaptive(x, lam, de, upper=False)
    elif rule == "composite":
        val = _de_integral_composite(x, lam, de, upper=False, panels=panels)
    else:
        raise ValueError(f"unknown rule {rule!r}")
    return val / _norm(lam, de)


def eval_DE(x: float, lam: float, de: DEParams, rule: str = "adaptive",
            panels: int = 96) -> tuple:
    """(D(x, lam), E(x, lam)).  D decreases to 0 as x -> +inf; E increases.

    Requires beta - lam > -1 for a convergent cosine endpoint; lam > 0 keeps
    the inner endpoint bounded (values in (-1, 0] stay integrable and are
    accepted for the derivative identities).
    """
    return (eval_D(x, lam, de, rule, panels), eval_E(x, lam, de, rule, panels))


def de_derivative_check(x: float, lam: float, de: DEParams,
                        h: float = 1e-5) -> tuple:
    """Central-difference check of dD/dx = -lam D(x, lam-1) and
    dE/dx = +lam E(x, lam-1).  Returns ((lhs_D, rhs_D), (lhs_E, rhs_E));
    nothing is asserted here."""
    if lam <= 1.0:
        raise ValueError("derivative check needs lam > 1 so lam - 1 > 0")
    # the fixed-node rule's error varies smoothly in x, so the central
    # difference does not amplify quadrature noise
    rule = "composite"
    np_ = 384
    lhs_d = (eval_D(x + h, lam, de, rule, np_) - eval_D(x - h, lam, de, rule, np_)) / (2.0 * h)
    rhs_d = -lam * eval_D(x, lam - 1.0, de, rule, np_)
    lhs_e = (eval_E(x + h, lam, de, rule, np_) - eval_E(x - h, lam, de, rule, np_)) / (2.0 * h)
    rhs_e = lam * eval_E(x, lam - 1.0, de, rule, np_)
    return (lhs_d, rhs_d), (lhs_e, rhs_e)


# ---------------------------------------------------------------------------
# pure-diffusion ruin at rho = +1
# ---------------------------------------------------------------------------

def _k_integrand(params: RiskParams):
    """Integrand of the ruin scale function for rho = +1.

    Derived by reduction of order from the homogeneous equation
    (sigma_P + sigma_R v)^2 h''/2 + (p + r v) h' = 0:
        (v + sigma_P/sigma_R)^(-2r/sigma_R^2)
        * exp(2 (p - r sigma_P/sigma_R) / sigma_R^2 / (v + sigma_P/sigma_R)).
    """
    cr = params.sigma_P / params.sigma_R
    power = -2.0 * params.r / params.sigma_R ** 2
    kappa = 2.0 * (params.p - params.r * cr) / params.sigma_R ** 2

    def g(v):
        v = np.asarray(v, dtype=float)
        return (v + cr) ** power * np.exp(kappa / (v + cr))

    return g, cr


def _check_rho1(params: RiskParams):
    if params.rho != 1.0:
        raise ValueError("the scale-function closed form supports rho = +1 only; "
                         "for other correlations solve the boundary-value problem")
    if params.lambda_P != 0.0 or params.lambda_R != 0.0 or params.delta != 0.0:
        raise ValueError("closed-form ruin needs lambda_P = lambda_R = delta = 0")
    if params.sigma_P <= 0 or params.sigma_R <= 0:
        raise ValueError("closed-form ruin needs positive volatilities")
    if params.r - 0.5 * params.sigma_R ** 2 <= 0:
        raise ValueError("r - sigma_R^2/2 <= 0: the scale integral diverges and "
                         "ruin is certain; no closed form is returned")


def eval_K(u: float, params: RiskParams, rule: str = "adaptive",
           panels: int = 64) -> float:
    """Scale function K(u) for rho = +1 (ruin = 1 - K(u)/K(inf))."""
    _check_rho1(params)
    if u < 0:
        raise ValueError("u must be nonnegative")
    if u == 0.0:
        return 0.0
    g, _ = _k_integrand(params)
    if rule == "adaptive":
        return _quad_silent(g, 0.0, u, "K(u)")
    if rule == "composite":
        return _gl_panels(g, 0.0, u, panels)
    raise ValueError(f"unknown rule {rule!r}")


def k_infinity(params: RiskParams, rule: str = "adaptive", panels: int = 64) -> float:
    """K(inf) via the tail substitution v = (sigma_P/sigma_R)(1/w - 1),
    which maps [0, inf) to (0, 1]; finite iff r > sigma_R^2 / 2."""
    _check_rho1(params)
    g, cr = _k_integrand(params)
    eta = 2.0 * params.r / params.sigma_R ** 2

    def gw(w):
        w = np.asarray(w, dtype=float)
        v = cr * (1.0 / w - 1.0)
        return g(v) * cr / (w * w)

    if rule == "adaptive":
        return _quad_silent(gw, 0.0, 1.0, "K(inf)")
    if rule == "composite":
        # power substitution w = s^q smooths the w -> 0 algebraic endpoint
        q = max(2, math.ceil(8.0 / (eta - 1.0)))

        def gs(s):
            s = np.asarray(s, dtype=float)
            return gw(s ** q) * q * s ** (q - 1)

        return _gl_panels(gs, 0.0, 1.0, panels)
    raise ValueError(f"unknown rule {rule!r}")


def closed_ruin_rho1(u: float, params: RiskParams, rule: str = "adaptive",
                     panels: int = 64) -> float:
    """Ruin probability 1 - K(u)/K(inf) for the jump-free model at rho = +1."""
    kin = k_infinity(params, rule, panels)
    return float(min(1.0, max(0.0, 1.0 - eval_K(u, params, rule, panels) / kin)))


# ---------------------------------------------------------------------------
# discounted penalty, threshold and barrier values (jump-free, rho^2 < 1)
# ---------------------------------------------------------------------------

def _shift(params: RiskParams) -> float:
    return params.rho * params.sigma_P / params.sigma_R


def closed_gerber_no_jumps(u: float, params: RiskParams,
                           rule: str = "adaptive") -> float:
    """phi(u) = D(u + shift, alpha+1) / D(shift, alpha+1) for w == 1,
    lambda_P = lambda_R = 0 and delta > r (phi and phi_d coincide here)."""
    if params.lambda_P != 0.0 or params.lambda_R != 0.0:
        raise ValueError("closed form requires lambda_P = lambda_R = 0")
    if params.delta <= params.r:
        raise ValueError("closed form requires delta > r")
    de = canonical_de_params(params)
    lam = de.ab.alpha + 1.0
    x0 = _shift(params)
    return eval_D(u + x0, lam, de, rule) / _gerber_denominator(params, rule)


@lru_cache(maxsize=128)
def _gerber_denominator(params: RiskParams, rule: str) -> float:
    de = canonical_de_params(params)
    return eval_D(_shift(params), de.ab.alpha + 1.0, de, rule)


def _threshold_blocks(b: float, mu: float, params: RiskParams):
    de0 = canonical_de_params(params)
    de1 = canonical_de_params(params, mu=mu)
    ab = de0.ab
    lam = ab.alpha + 1.0
    x0 = _shift(params)
    xb = b + x0
    return de0, de1, ab, lam, x0, xb


def closed_threshold_value(u: float, b: float, mu: float,
                           params: RiskParams) -> float:
    """Expected discounted threshold dividends for the jump-free model.

    Piecewise in the D/E family below b and the reduced-drift family above,
    with the constants solved numerically from the four boundary and pasting
    conditions V(0) = 0, V(inf) = mu/delta, value and slope continuity at b.
    The printed constant formulas are kept as a cross-check diagnostic.
    """
    if params.lambda_P != 0.0 or params.lambda_R != 0.0:
        raise ValueError("closed form requires lambda_P = lambda_R = 0")
    if params.delta <= params.r:
        raise ValueError("closed form requires delta > r")
    if b <= 0 or mu <= 0:
        raise ValueError("threshold needs b > 0 and mu > 0")
    c3, c4, c5 = _threshold_constants(b, mu, params)
    de0, de1, ab, lam, x0, xb = _threshold_blocks(b, mu, params)
    target = mu / params.delta
    x = u + x0
    if u <= b:
        return c3 * eval_D(x, lam, de0) + c4 * eval_E(x, lam, de0)
    return c5 * eval_D(x, lam, de1) + target


@lru_cache(maxsize=128)
def _threshold_constants(b: float, mu: float, params: RiskParams):
    de0, de1, ab, lam, x0, xb = _threshold_blocks(b, mu, params)
    al = ab.alpha
    target = mu / params.delta
    d_x0 = eval_D(x0, lam, de0)
    e_x0 = eval_E(x0, lam, de0)
    d_xb = eval_D(xb, lam, de0)
    e_xb = eval_E(xb, lam, de0)
    da_xb = eval_D(xb, al, de0)
    ea_xb = eval_E(xb, al, de0)
    d1_xb = eval_D(xb, lam, de1)
    d1a_xb = eval_D(xb, al, de1)
    # unknowns (C3, C4, C5): value at 0, value pasting, slope pasting
    m = np.array([
        [d_x0, e_x0, 0.0],
        [d_xb, e_xb, -d1_xb],
        [-lam * da_xb, lam * ea_xb, lam * d1a_xb],
    ])
    rhs = np.array([0.0, target, 0.0])
    cond = np.linalg.cond(m)
    if not np.isfinite(cond) or cond > 1e12:
        raise ValueError(f"threshold pasting system is singular "
                         f"(condition number {cond:.3e})")
    c3, c4, c5 = np.linalg.solve(m, rhs)
    # printed closed-form constants as a cross-check
    q1 = d_xb * d1a_xb - da_xb * d1_xb
    q2 = d1a_xb * e_xb + d1_xb * ea_xb
    den = q1 * e_x0 - q2 * d_x0
    if den != 0.0:
        c3_ref = target * d1a_xb * e_x0 / den
        c4_ref = -target * d_x0 * d1a_xb / den
        c5_ref = target * (e_x0 * da_xb + d_x0 * ea_xb) / den
        scale = max(abs(c3), abs(c4), abs(c5), 1e-300)
        mismatch = max(abs(c3 - c3_ref), abs(c4 - c4_ref), abs(c5 - c5_ref)) / scale
        if mismatch > 1e-6:
            warnings.warn(
                f"printed threshold constants disagree with the solved pasting "
                f"system by {mismatch:.2e} relative", RuntimeWarning)
    return float(c3), float(c4), float(c5)


def closed_barrier_value(u: float, b: float, params: RiskParams) -> float:
    """Expected discounted barrier dividends for the jump-free model,
    0 <= u <= b; the constants solve {V(0) = 0, V'(b) = 1}."""
    if params.lambda_P != 0.0 or params.lambda_R != 0.0:
        raise ValueError("closed form requires lambda_P = lambda_R = 0")
    if params.delta <= 0:
        raise ValueError("barrier value needs delta > 0")
    if not 0.0 <= u <= b:
        raise ValueError("closed barrier value is defined for 0 <= u <= b; "
                         "an initial excess above b is a simulation-side lump")
    c7, c8 = _barrier_constants(b, params)
    de = canonical_de_params(params)
    lam = de.ab.alpha + 1.0
    x = u + _shift(params)
    return float(c7 * eval_D(x, lam, de) + c8 * eval_E(x, lam, de))


@lru_cache(maxsize=128)
def _barrier_constants(b: float, params: RiskParams):
    de = canonical_de_params(params)
    ab = de.ab
    lam = ab.alpha + 1.0
    al = ab.alpha
    x0 = _shift(params)
    xb = b + x0
    d_x0 = eval_D(x0, lam, de)
    e_x0 = eval_E(x0, lam, de)
    da_xb = eval_D(xb, al, de)
    ea_xb = eval_E(xb, al, de)
    m = np.array([
        [d_x0, e_x0],
        [-lam * da_xb, lam * ea_xb],
    ])
    cond = np.linalg.cond(m)
    if not np.isfinite(cond) or cond > 1e12:
        raise ValueError(f"barrier boundary system is singular "
                         f"(condition number {cond:.3e})")
    c7, c8 = np.linalg.solve(m, np.array([0.0, 1.0]))
    a_comb = ea_xb * d_x0 + da_xb * e_x0
    if a_comb != 0.0:
        c7_ref = -e_x0 / (lam * a_comb)
        c8_ref = d_x0 / (lam * a_comb)
        scale = max(abs(c7), abs(c8), 1e-300)
        mismatch = max(abs(c7 - c7_ref), abs(c8 - c8_ref)) / scale
        if mismatch > 1e-6:
            warnings.warn(
                f"printed barrier constants disagree with the solved boundary "
                f"system by {mismatch:.2e} relative", RuntimeWarning)
    return float(c7), float(c8)
