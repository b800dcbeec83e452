"""Grid-based solver for the model's differential and integro-differential
equations: the discounted-penalty equations, the threshold-dividend moment
recursion, and the barrier moment recursion, plus a residual checker.

Equations are written as

    a(u) y'' + b(u) y' + c(u) y + J[y](u) + s(u) = 0

with J the jump part of the domain-restricted operator,

    J[y](u) = lambda_P * E[y(u - S_P) 1{S_P <= u}] + lambda_R * E[y(u(1+S_R))].

Discretization is second-order central differences on a uniform grid with a
direct banded solve; jump integrals are evaluated exactly for the piecewise
linear interpolant (per-segment first-moment integration of the law), and
the coupled system is iterated to a fixed point: solve the banded system
against the lagged jump term until the sup-norm change drops below 1e-8.
Beyond the grid, candidates extend by a declared far-field value; barrier
solves extend by the reflecting boundary value instead, because the
controlled surplus never exceeds the barrier.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.sparse import csc_matrix, lil_matrix
from scipy.sparse.linalg import splu

from .model import JumpLaw, PenaltyFn, RiskParams

__all__ = [
    "Grid",
    "GridFunction",
    "EquationSpec",
    "IDESolution",
    "ThresholdMomentsResult",
    "BarrierMomentsResult",
    "IDEConvergenceError",
    "gerber_equation_spec",
    "threshold_equation_spec",
    "barrier_equation_spec",
    "solve_linear_bvp",
    "solve_gerber_ide",
    "solve_threshold_moments",
    "solve_barrier_moments",
    "residual",
]

logger = logging.getLogger(__name__)

FIXED_POINT_TOL = 1e-8
MAX_ITERATIONS = 500


class IDEConvergenceError(RuntimeError):
    def __init__(self, message: str, last_change: float):
        super().__init__(f"{message} (last sup-norm change {last_change:.3e})")
        self.last_change = last_change


@dataclass(frozen=True)
class Grid:
    u_max: float
    n: int

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("grid needs at least 3 nodes")
        if self.u_max <= 0:
            raise ValueError("u_max must be positive")

    @property
    def h(self) -> float:
        return self.u_max / (self.n - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.u_max, self.n)

    def snap(self, x: float) -> tuple:
        """(index, distance) of the node nearest to x."""
        i = int(round(x / self.h))
        i = min(max(i, 0), self.n - 1)
        return i, abs(x - i * self.h)


@dataclass(frozen=True)
class GridFunction:
    """Values on a uniform grid plus a declared far-field value; evaluation
    interpolates linearly inside and returns the asymptote beyond u_max."""
    grid: Grid
    values: np.ndarray
    asymptote: float = 0.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.interp(np.clip(x, 0.0, self.grid.u_max),
                        self.grid.nodes, self.values)
        return np.where(x > self.grid.u_max, self.asymptote, out)

    def derivative_at_node(self, i: int) -> float:
        h = self.grid.h
        v = self.values
        if i == 0:
            return float((-3 * v[0] + 4 * v[1] - v[2]) / (2 * h))
        if i == self.grid.n - 1:
            return float((3 * v[-1] - 4 * v[-2] + v[-3]) / (2 * h))
        return float((v[i + 1] - v[i - 1]) / (2 * h))


def _as_fn(x) -> Callable:
    if callable(x):
        return x
    val = float(x)
    return lambda u, _v=val: np.full_like(np.asarray(u, dtype=float), _v)


@dataclass(frozen=True)
class EquationSpec:
    """Coefficients, jump terms, source, and boundary data for one equation.

    left_bc: ("dirichlet", value) or ("equation",) for the degenerate
    sigma_P = 0 case (the first-order equation itself holds at u = 0).
    right_bc: ("dirichlet", value) or ("neumann", slope).
    clamp_right: extend jump integrals beyond the grid by the right-endpoint
    value instead of the asymptote (reflecting barrier).
    """
    a: Callable
    b: Callable
    c: Callable
    s: Callable
    lambda_claim: float = 0.0
    claim_law: Optional[JumpLaw] = None
    lambda_return: float = 0.0
    return_law: Optional[JumpLaw] = None
    left_bc: tuple = ("dirichlet", 0.0)
    right_bc: tuple = ("dirichlet", 0.0)
    asymptote: float = 0.0
    clamp_right: bool = False
    flux_interface: Optional[tuple] = None   # (node index, p, p - mu) pasting

    def has_jumps(self) -> bool:
        return self.lambda_claim > 0.0 or self.lambda_return > 0.0


@dataclass(frozen=True)
class IDESolution:
    solution: GridFunction
    residual: float
    iterations: int


@dataclass(frozen=True)
class ThresholdMomentsResult:
    functions: tuple
    residuals: tuple
    iterations: tuple
    b_snapped: float
    snap_distance: float


@dataclass(frozen=True)
class BarrierMomentsResult:
    functions: tuple
    residuals: tuple
    iterations: tuple


# ---------------------------------------------------------------------------
# equation builders
# ---------------------------------------------------------------------------

def _diffusion_a(params: RiskParams) -> Callable:
    def a(u):
        u = np.asarray(u, dtype=float)
        return 0.5 * (params.sigma_P ** 2
                      + 2.0 * params.rho * params.sigma_P * params.sigma_R * u
                      + params.sigma_R ** 2 * u * u)
    return a


def gerber_equation_spec(params: RiskParams, claim_law: Optional[JumpLaw],
                         return_law: Optional[JumpLaw], penalty: PenaltyFn,
                         variant: str = "phi") -> EquationSpec:
    """Equation for the discounted penalty: (delta + lam_P + lam_R) phi =
    G phi + claim overshoot source; phi_d drops the source, phi_s starts
    at zero."""
    if variant not in ("phi", "phi_s", "phi_d"):
        raise ValueError(f"unknown variant {variant!r}")
    lam_p, lam_r = params.lambda_P, params.lambda_R
    ctot = -(params.delta + lam_p + lam_r)

    if variant == "phi_d" or lam_p == 0.0:
        src = _as_fn(0.0)
    else:
        def src(u):
            u = np.asarray(u, dtype=float)
            return np.array([penalty.claim_source(float(x), claim_law, lam_p)
                             for x in np.atleast_1d(u)]).reshape(u.shape)

    w00 = penalty.at_zero() if variant in ("phi", "phi_d") else 0.0
    left = ("dirichlet", w00) if params.sigma_P > 0 else ("equation",)
    return EquationSpec(
        a=_diffusion_a(params),
        b=lambda u: params.p + params.r * np.asarray(u, dtype=float),
        c=_as_fn(ctot),
        s=src,
        lambda_claim=lam_p, claim_law=claim_law,
        lambda_return=lam_r, return_law=return_law,
        left_bc=left, right_bc=("dirichlet", 0.0), asymptote=0.0,
    )


def threshold_equation_spec(params: RiskParams, claim_law: Optional[JumpLaw],
                            return_law: Optional[JumpLaw], b_level: float,
                            mu: float, k: int,
                            v_prev: Callable) -> EquationSpec:
    """k-th moment equation under a threshold strategy: the drift loses mu
    above b and the previous moment feeds the source k mu V_{k-1}(u)."""
    lam_p, lam_r = params.lambda_P, params.lambda_R
    ctot = -(lam_p + lam_r + k * params.delta)
    target = (mu / params.delta) ** k

    # the dividend indicator is strict, so the node at b itself carries the
    # average of the two one-sided equations: that keeps the shared stencil
    # second-order accurate across the kink in V''
    def drift(u):
        u = np.asarray(u, dtype=float)
        return params.p + params.r * u - mu * ((u > b_level) + 0.5 * (u == b_level))

    def src(u):
        u = np.asarray(u, dtype=float)
        weight = (u > b_level) + 0.5 * (u == b_level)
        return k * mu * np.asarray(v_prev(u), dtype=float) * weight

    a_fn = _diffusion_a(params)
    flux = None
    if params.sigma_P == 0.0 and float(a_fn(b_level)) == 0.0:
        flux = (b_level, params.p, params.p - mu, mu)
    left = ("dirichlet", 0.0) if params.sigma_P > 0 else ("equation",)
    return EquationSpec(
        a=a_fn, b=drift, c=_as_fn(ctot), s=src,
        lambda_claim=lam_p, claim_law=claim_law,
        lambda_return=lam_r, return_law=return_law,
        left_bc=left, right_bc=("dirichlet", target), asymptote=target,
        flux_interface=flux,
    )


def barrier_equation_spec(params: RiskParams, claim_law: Optional[JumpLaw],
                          return_law: Optional[JumpLaw], k: int,
                          prev_at_b: float) -> EquationSpec:
    """k-th barrier moment equation on [0, b] with the reflecting boundary
    slope k * Vbar_{k-1}(b) and constant extension beyond the barrier."""
    lam_p, lam_r = params.lambda_P, params.lambda_R
    ctot = -(lam_p + lam_r + k * params.delta)
    left = ("dirichlet", 0.0) if params.sigma_P > 0 else ("equation",)
    return EquationSpec(
        a=_diffusion_a(params),
        b=lambda u: params.p + params.r * np.asarray(u, dtype=float),
        c=_as_fn(ctot),
        s=_as_fn(0.0),
        lambda_claim=lam_p, claim_law=claim_law,
        lambda_return=lam_r, return_law=return_law,
        left_bc=left, right_bc=("neumann", k * prev_at_b),
        asymptote=0.0, clamp_right=True,
    )


# ---------------------------------------------------------------------------
# jump operator on the grid (exact for the piecewise-linear interpolant)
# ---------------------------------------------------------------------------

def _claim_operator(law: JumpLaw, grid: Grid):
    """Matrix and tail vector with M @ y + tail * ext equal to
    E[y(u_i - S) 1{S <= u_i}] for piecewise-linear y extended by ext."""
    n, h = grid.n, grid.h
    M = np.zeros((n, n))
    tail = np.zeros(n)
    u = grid.nodes
    if law.is_discrete():
        for xa, pa in zip(law.atoms_x, law.atoms_p):
            v = u - xa
            inside = v >= 0.0
            over = v > grid.u_max
            pos = np.clip(v / h, 0.0, n - 1)
            j0 = np.floor(pos).astype(int)
            j0 = np.minimum(j0, n - 2)
            frac = pos - j0
            rows = np.arange(n)
            sel = inside & ~over
            np.add.at(M, (rows[sel], j0[sel]), pa * (1.0 - frac[sel]))
            np.add.at(M, (rows[sel], j0[sel] + 1), pa * frac[sel])
            tail[over] += pa
        return M, tail
    # continuous law: Toeplitz hat weights from (F, M1) segment integrals
    ks = np.arange(-n, n + 1)
    z = ks * h
    F = np.asarray(law.cdf(z), dtype=float)
    M1 = np.asarray(law.partial_mean(z), dtype=float)
    off = n
    kk = np.arange(-(n - 1), n)
    dFa = F[kk + off] - F[kk - 1 + off]
    dMa = M1[kk + off] - M1[kk - 1 + off]
    A = (1.0 - kk) * dFa + dMa / h
    dFb = F[kk + 1 + off] - F[kk + off]
    dMb = M1[kk + 1 + off] - M1[kk + off]
    B = (1.0 + kk) * dFb - dMb / h
    offk = n - 1
    KK = np.subtract.outer(np.arange(n), np.arange(n))
    M[:, :] = A[KK + offk] + B[KK + offk]
    M[:, 0] = A[np.arange(n) + offk]
    M[:, n - 1] = B[(np.arange(n) - (n - 1)) + offk]
    tail[:] = F[np.arange(n) + 1]              # F(u_i - u_max)
    return M, tail


def _return_operator(law: JumpLaw, grid: Grid):
    """Matrix and tail with M @ y + tail * ext equal to E[y(u_i (1 + S))]."""
    n, h = grid.n, grid.h
    M = np.zeros((n, n))
    tail = np.zeros(n)
    u = grid.nodes
    v = grid.nodes
    if law.is_discrete():
        for xa, pa in zip(law.atoms_x, law.atoms_p):
            w = u * (1.0 + xa)
            over = w > grid.u_max
            pos = np.clip(w / h, 0.0, n - 1)
            j0 = np.minimum(np.floor(pos).astype(int), n - 2)
            frac = pos - j0
            rows = np.arange(n)
            sel = ~over
            np.add.at(M, (rows[sel], j0[sel]), pa * (1.0 - frac[sel]))
            np.add.at(M, (rows[sel], j0[sel] + 1), pa * frac[sel])
            tail[over] += pa
        return M, tail
    M[0, 0] = 1.0
    chunk = max(1, int(2e6 // n))
    for lo in range(1, n, chunk):
        hi = min(n, lo + chunk)
        ui = u[lo:hi, None]
        Z = v[None, :] / ui - 1.0
        Fz = np.asarray(law.cdf(Z), dtype=float)
        Mz = np.asarray(law.partial_mean(Z), dtype=float)
        dF = np.diff(Fz, axis=1)
        dM = np.diff(Mz, axis=1)
        M[lo:hi, :-1] += ((v[1:][None, :] - ui) * dF - ui * dM) / h
        M[lo:hi, 1:] += ((ui - v[:-1][None, :]) * dF + ui * dM) / h
        tail[lo:hi] = 1.0 - Fz[:, -1]
    return M, tail


def _jump_operator(spec: EquationSpec, grid: Grid):
    """Combined weighted jump matrix and tail; None when there are no jumps."""
    if not spec.has_jumps():
        return None, None
    n = grid.n
    M = np.zeros((n, n))
    tail = np.zeros(n)
    if spec.lambda_claim > 0.0:
        mc, tc = _claim_operator(spec.claim_law, grid)
        M += spec.lambda_claim * mc
        tail += spec.lambda_claim * tc
    if spec.lambda_return > 0.0:
        mr, tr = _return_operator(spec.return_law, grid)
        M += spec.lambda_return * mr
        tail += spec.lambda_return * tr
    if spec.clamp_right:
        M[:, n - 1] += tail
        tail = np.zeros(n)
    return M, tail


# ---------------------------------------------------------------------------
# banded assembly and solvers
# ---------------------------------------------------------------------------

def _assemble(spec: EquationSpec, grid: Grid):
    """Sparse operator rows for the differential part plus boundary rows.
    Returns (LU factorization, mask of rows where the equation holds)."""
    n, h = grid.n, grid.h
    u = grid.nodes
    av = np.asarray(spec.a(u), dtype=float)
    bv = np.asarray(spec.b(u), dtype=float)
    cv = np.asarray(spec.c(u), dtype=float)
    mat = lil_matrix((n, n))
    eq_rows = np.zeros(n, dtype=bool)
    rhs_fixed = np.zeros(n)

    for i in range(1, n - 1):
        mat[i, i - 1] = av[i] / h ** 2 - bv[i] / (2 * h)
        mat[i, i] = -2 * av[i] / h ** 2 + cv[i]
        mat[i, i + 1] = av[i] / h ** 2 + bv[i] / (2 * h)
        eq_rows[i] = True

    kind_l = spec.left_bc[0]
    if kind_l == "dirichlet":
        mat[0, 0] = 1.0
        rhs_fixed[0] = spec.left_bc[1]
    elif kind_l == "equation":
        # a(0) = 0: first-order equation with a one-sided O(h^2) derivative
        mat[0, 0] = bv[0] * (-3.0) / (2 * h) + cv[0]
        mat[0, 1] = bv[0] * 4.0 / (2 * h)
        mat[0, 2] = bv[0] * (-1.0) / (2 * h)
        eq_rows[0] = True
    else:
        raise ValueError(f"unknown left boundary {spec.left_bc!r}")

    kind_r = spec.right_bc[0]
    if kind_r == "dirichlet":
        mat[n - 1, n - 1] = 1.0
        rhs_fixed[n - 1] = spec.right_bc[1]
    elif kind_r == "neumann":
        # ghost node y_n = y_{n-2} + 2 h g keeps the stencil second order
        g = spec.right_bc[1]
        up = av[n - 1] / h ** 2 + bv[n - 1] / (2 * h)
        mat[n - 1, n - 2] = 2 * av[n - 1] / h ** 2
        mat[n - 1, n - 1] = -2 * av[n - 1] / h ** 2 + cv[n - 1]
        rhs_fixed[n - 1] = -up * 2 * h * g     # moved to the right-hand side
        eq_rows[n - 1] = True
    else:
        raise ValueError(f"unknown right boundary {spec.right_bc!r}")

    if spec.flux_interface is not None:
        b_level, p_lo, p_hi, mu = spec.flux_interface
        ib, _ = grid.snap(b_level)
        if 2 <= ib <= n - 3:
            for j in range(n):
                mat[ib, j] = 0.0
            mat[ib, ib - 2] = p_lo / (2 * h)
            mat[ib, ib - 1] = -4 * p_lo / (2 * h)
            mat[ib, ib] = 3 * p_lo / (2 * h) + 3 * p_hi / (2 * h)
            mat[ib, ib + 1] = -4 * p_hi / (2 * h)
            mat[ib, ib + 2] = p_hi / (2 * h)
            rhs_fixed[ib] = mu
            eq_rows[ib] = False

    # decouple Dirichlet unknowns: move their known values to the right-hand
    # side and zero their columns, so the factorization cannot smear
    # round-off from the large interior entries into the boundary values
    dirichlet = []
    if spec.left_bc[0] == "dirichlet":
        dirichlet.append((0, spec.left_bc[1]))
    if spec.right_bc[0] == "dirichlet":
        dirichlet.append((n - 1, spec.right_bc[1]))
    for d, v in dirichlet:
        col = mat[:, d].toarray().ravel()
        col[d] = 0.0
        rows = np.nonzero(col)[0]
        if len(rows):
            rhs_fixed[rows] -= col[rows] * v
            for rr in rows:
                mat[rr, d] = 0.0

    lu = splu(csc_matrix(mat))
    sv = np.asarray(spec.s(u), dtype=float)
    return lu, eq_rows, rhs_fixed, sv


def _initial_guess(spec: EquationSpec, grid: Grid) -> np.ndarray:
    n = grid.n
    left = spec.left_bc[1] if spec.left_bc[0] == "dirichlet" else spec.asymptote
    right = spec.right_bc[1] if spec.right_bc[0] == "dirichlet" else spec.asymptote
    return np.linspace(left, right, n)


def _solve_spec(spec: EquationSpec, grid: Grid,
                tol: float = FIXED_POINT_TOL,
                max_iter: int = MAX_ITERATIONS):
    """Direct banded solve, iterated against the lagged jump term when the
    equation has one.  Returns (values, iterations)."""
    lu, eq_rows, rhs_fixed, sv = _assemble(spec, grid)
    jump, tail = _jump_operator(spec, grid)

    def enforce_bc(y):
        if spec.left_bc[0] == "dirichlet":
            y[0] = spec.left_bc[1]
        if spec.right_bc[0] == "dirichlet":
            y[-1] = spec.right_bc[1]
        return y

    if jump is None:
        rhs = rhs_fixed.copy()
        rhs[eq_rows] -= sv[eq_rows]
        return enforce_bc(lu.solve(rhs)), 1

    y = _initial_guess(spec, grid)
    tail_src = tail * spec.asymptote
    relax = 1.0
    prev_change = np.inf
    for it in range(1, max_iter + 1):
        jy = jump @ y + tail_src
        rhs = rhs_fixed.copy()
        rhs[eq_rows] -= sv[eq_rows] + jy[eq_rows]
        y_new = enforce_bc(lu.solve(rhs))
        if relax != 1.0:
            y_new = relax * y_new + (1.0 - relax) * y
        change = float(np.max(np.abs(y_new - y)))
        y = y_new
        if change < tol:
            return y, it
        if it > 5 and change > prev_change and relax == 1.0:
            relax = 0.5
            logger.info("fixed-point iteration non-monotone at %d "
                        "(%.3e -> %.3e); damping by 0.5", it, prev_change, change)
        prev_change = change
    raise IDEConvergenceError(
        f"jump fixed point did not converge in {max_iter} iterations", prev_change)


def solve_linear_bvp(spec: EquationSpec, grid: Grid) -> GridFunction:
    """Jump-free boundary-value solve: central differences, banded solve."""
    if spec.has_jumps():
        raise ValueError("solve_linear_bvp handles jump-free equations; "
                         "use solve_gerber_ide or the moment solvers")
    values, _ = _solve_spec(spec, grid)
    return GridFunction(grid, values, spec.asymptote)


def solve_gerber_ide(params: RiskParams, claim_law: Optional[JumpLaw],
                     return_law: Optional[JumpLaw], penalty: PenaltyFn,
                     variant: str, grid: Grid,
                     residual_probes: int = 121) -> IDESolution:
    """Solve the discounted-penalty equation for phi, phi_s, or phi_d."""
    spec = gerber_equation_spec(params, claim_law, return_law, penalty, variant)
    values, iters = _solve_spec(spec, grid)
    fn = GridFunction(grid, values, spec.asymptote)
    res = residual(fn, spec, _probe_nodes(grid, residual_probes))
    return IDESolution(fn, res, iters)


def solve_threshold_moments(params: RiskParams, claim_law: Optional[JumpLaw],
                            return_law: Optional[JumpLaw], b: float, mu: float,
                            k_max: int, grid: Grid,
                            residual_probes: int = 121) -> ThresholdMomentsResult:
    """Moments V_1..V_k of discounted threshold dividends on the grid.

    b is snapped to the nearest node (the distance is reported); pasting at
    b is implicit in the shared stencil, and the dividend indicator is
    strict, so the node at b uses the no-dividend drift.
    """
    if params.delta <= 0:
        raise ValueError("threshold moments need delta > 0")
    ib, snap = grid.snap(b)
    if not 1 <= ib <= grid.n - 2:
        raise ValueError("threshold level must be interior to the grid")
    b_snap = float(grid.nodes[ib])
    snap = abs(b - b_snap)
    if snap > 0:
        logger.info("threshold level snapped to %.6g (distance %.3e)", b_snap, snap)
    prev: Callable = _as_fn(1.0)
    fns, ress, its = [], [], []
    for k in range(1, k_max + 1):
        spec = threshold_equation_spec(params, claim_law, return_law,
                                       b_snap, mu, k, prev)
        values, it = _solve_spec(spec, grid)
        fn = GridFunction(grid, values, spec.asymptote)
        res = residual(fn, spec, _probe_nodes(grid, residual_probes,
                                              exclude=(ib,)))
        fns.append(fn)
        ress.append(res)
        its.append(it)
        prev = fn
    return ThresholdMomentsResult(tuple(fns), tuple(ress), tuple(its),
                                  b_snap, snap)


def solve_barrier_moments(params: RiskParams, claim_law: Optional[JumpLaw],
                          return_law: Optional[JumpLaw], b: float, k_max: int,
                          grid: Grid,
                          residual_probes: int = 121) -> BarrierMomentsResult:
    """Moments Vbar_1..Vbar_k of discounted barrier dividends on [0, b].

    The grid's right endpoint must be the barrier itself; each moment gets a
    reflecting (Neumann) condition k * Vbar_{k-1}(b) there.
    """
    if params.delta <= 0:
        raise ValueError("barrier moments need delta > 0")
    if abs(grid.u_max - b) > 1e-12 * max(1.0, b):
        raise ValueError("the grid's right endpoint must equal the barrier b")
    prev_at_b = 1.0
    fns, ress, its = [], [], []
    for k in range(1, k_max + 1):
        spec = barrier_equation_spec(params, claim_law, return_law, k, prev_at_b)
        values, it = _solve_spec(spec, grid)
        # constant extension at the reflecting boundary
        fn = GridFunction(grid, values, asymptote=float(values[-1]))
        res = residual(fn, spec, _probe_nodes(grid, residual_probes))
        fns.append(fn)
        ress.append(res)
        its.append(it)
        prev_at_b = float(values[-1])
    return BarrierMomentsResult(tuple(fns), tuple(ress), tuple(its))


# ---------------------------------------------------------------------------
# residual checker
# ---------------------------------------------------------------------------

def _probe_nodes(grid: Grid, count: int, exclude: Sequence[int] = ()) -> np.ndarray:
    idx = np.unique(np.linspace(1, grid.n - 2, min(count, grid.n - 2)).astype(int))
    idx = idx[~np.isin(idx, list(exclude))]
    return grid.nodes[idx]


def residual(candidate: Union[GridFunction, Callable], spec: EquationSpec,
             probes: Union[Grid, np.ndarray, Sequence[float]],
             fd_h: float = 1e-2) -> float:
    """Sup-norm of a y'' + b y' + c y + J[y] + s over the probe points.

    Grid candidates differentiate with their own grid stencil; callable
    candidates use 5-point central differences of width fd_h.  Jump
    integrals are evaluated by adaptive quadrature against the candidate,
    extended beyond any grid by its declared asymptote.
    """
    if isinstance(probes, Grid):
        pts = _probe_nodes(probes, 201)
    else:
        pts = np.asarray(probes, dtype=float)

    if isinstance(candidate, GridFunction):
        g = candidate.grid
        fn = candidate

        def d1(x):
            i = min(max(int(round(x / g.h)), 1), g.n - 2)
            return (fn.values[i + 1] - fn.values[i - 1]) / (2 * g.h)

        def d2(x):
            i = min(max(int(round(x / g.h)), 1), g.n - 2)
            return (fn.values[i + 1] - 2 * fn.values[i] + fn.values[i - 1]) / g.h ** 2

        def at(x):
            i = min(max(int(round(x / g.h)), 1), g.n - 2)
            return fn.values[i]

        def snap_pt(x):
            i = min(max(int(round(x / g.h)), 1), g.n - 2)
            return g.nodes[i]
    else:
        fn = candidate

        def d1(x):
            return (fn(x - 2 * fd_h) - 8 * fn(x - fd_h) + 8 * fn(x + fd_h)
                    - fn(x + 2 * fd_h)) / (12 * fd_h)

        def d2(x):
            return (-fn(x - 2 * fd_h) + 16 * fn(x - fd_h) - 30 * fn(x)
                    + 16 * fn(x + fd_h) - fn(x + 2 * fd_h)) / (12 * fd_h ** 2)

        def at(x):
            return fn(x)

        def snap_pt(x):
            return x

    # jump integrals: exact piecewise-linear quadrature for grid candidates
    # (adaptive quadrature subdivides poorly across hundreds of kinks),
    # adaptive quadrature for smooth callables
    jump_at = None
    if spec.has_jumps() and isinstance(candidate, GridFunction):
        mat, tail = _jump_operator(spec, candidate.grid)
        ext = candidate.asymptote
        jvals = mat @ candidate.values + (tail * ext if tail is not None else 0.0)

        def jump_at(x):
            i = min(max(int(round(x / candidate.grid.h)), 0), candidate.grid.n - 1)
            return jvals[i]

    vec = np.vectorize(lambda z: float(fn(z)), otypes=[float])
    worst = 0.0
    for x in pts:
        x = snap_pt(float(x))
        val = (float(spec.a(x)) * d2(x) + float(spec.b(x)) * d1(x)
               + float(spec.c(x)) * at(x) + float(spec.s(x)))
        if spec.has_jumps():
            if jump_at is not None:
                val += jump_at(x)
            else:
                if spec.lambda_claim > 0.0:
                    val += spec.lambda_claim * spec.claim_law.expect(
                        lambda z: vec(x - z), hi=x)
                if spec.lambda_return > 0.0:
                    val += spec.lambda_return * spec.return_law.expect(
                        lambda z: vec(x * (1.0 + z)))
        worst = max(worst, abs(val))
    return worst
