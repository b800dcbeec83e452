"""Numba path-simulation kernels.

Two engines share one RNG discipline (per-replicate xoshiro256++ streams,
Box-Muller pairs with a cached spare, bridge uniforms drawn only when the
crossing exponent is below BRIDGE_CUTOFF):

* ``run_paths``: general scalar kernel; two-sided claim jumps and
  multiplicative return jumps at exactly sampled Poisson epochs, none /
  threshold / barrier strategies, Euler or exponential-exact stepping.
* ``run_ruin_blocked``: lane-vectorized kernel for the jump-free,
  strategy-free ruin workload (the expensive acceptance scenarios); short
  phase loops keep everything SIMD, dead lanes are compacted periodically.

Both kernels advance the clock by the same accumulation sequence and use the
same per-value arithmetic, compiled without fastmath, so a jump-free path
comes out bit-identical from either engine given the same seed.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

from ._fastrng import (EXP_ONE, LN2, M64, MANT_MASK, SQRT2, U64,
                       fsincos_turn, next_u64, state_from_seed)

RT_NONE = 0
RT_CLAIM = 1
RT_OSC = 2

ST_NONE = 0
ST_THRESHOLD = 1
ST_BARRIER = 2

SC_EULER = 0
SC_EXACT = 1

# bridge crossing exponents above this give prob < e^-40: treated as zero,
# and the uniform is not drawn
BRIDGE_CUTOFF = 40.0

COMPACT_EVERY = 1024
BLOCK_LANES = 128

_L1 = 0.6666666666666735
_L2 = 0.3999999999940942
_L3 = 0.2857142874366239
_L4 = 0.22222198432149784
_L5 = 0.1818357216161805
_L6 = 0.15313837699209373
_L7 = 0.14798198605116586


@njit(inline="always", cache=True)
def _flog_scratch(x, fb, ub):
    """log(x) for 0 < x <= 1 via a 1-element f64/u64 view pair."""
    fb[0] = x
    bits = ub[0]
    e32 = np.int32(bits >> U64(52)) - 1023
    ub[0] = (bits & MANT_MASK) | EXP_ONE
    m = fb[0]
    big = m > SQRT2
    m = 0.5 * m if big else m
    ef = np.float64(e32) + (1.0 if big else 0.0)
    s = (m - 1.0) / (m + 1.0)
    ss = s * s
    poly = 2.0 + ss * (_L1 + ss * (_L2 + ss * (_L3 + ss * (_L4 + ss * (_L5 + ss * (_L6 + ss * _L7))))))
    return s * poly + ef * LN2


@njit(inline="always", cache=True)
def _unit_open(r, fb, ub):
    ub[0] = ((r >> U64(12)) | U64(1)) | EXP_ONE
    return fb[0] - 1.0


@njit(inline="always", cache=True)
def _unit(r, fb, ub):
    ub[0] = (r >> U64(12)) | EXP_ONE
    return fb[0] - 1.0


@njit(inline="always", cache=True)
def _exp_draw(s, fb, ub):
    u = _unit_open(next_u64(s), fb, ub)
    return -_flog_scratch(u, fb, ub)


@njit(inline="always", cache=True)
def _normal_pair(s, fb, ub):
    u1 = _unit_open(next_u64(s), fb, ub)
    u2 = _unit(next_u64(s), fb, ub)
    rad = np.sqrt(-2.0 * _flog_scratch(u1, fb, ub))
    c, sn = fsincos_turn(u2)
    return rad * c, rad * sn


@njit(inline="always", cache=True)
def _bridge_hit(s, fb, ub, u_left, u_right, sig2h):
    """Brownian-bridge crossing test for the zero level; one uniform.

    Crossing prob is exp(-2 u_left u_right / sig2h); the comparison u < p is
    evaluated as log(u) * sig2h < -2 u_left u_right to avoid an exp call.
    """
    uu = _unit_open(next_u64(s), fb, ub)
    return _flog_scratch(uu, fb, ub) * sig2h < -2.0 * u_left * u_right


@njit(inline="always", cache=True)
def _sample_jump(kind, par, s, fb, ub):
    """kinds: 0 exponential(mean), 1 mixed exponential(p_down, m_down, m_up),
    2 normal(mu, sigma), 3 point mass, 4 shifted lognormal(mu, sigma),
    5 empirical table [m, x_0.., c_0..] with cumulative probs."""
    if kind == 0:
        return -par[0] * _flog_scratch(_unit_open(next_u64(s), fb, ub), fb, ub)
    if kind == 1:
        u = _unit(next_u64(s), fb, ub)
        e = -_flog_scratch(_unit_open(next_u64(s), fb, ub), fb, ub)
        if u < par[0]:
            return par[1] * e
        return -par[2] * e
    if kind == 2:
        z, _ = _normal_pair(s, fb, ub)
        return par[0] + par[1] * z
    if kind == 3:
        return par[0]
    if kind == 4:
        z, _ = _normal_pair(s, fb, ub)
        return np.exp(par[0] + par[1] * z) - 1.0
    m = np.int64(par[0])
    u = _unit(next_u64(s), fb, ub)
    lo = 0
    hi = m - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if par[1 + m + mid] < u:
            lo = mid + 1
        else:
            hi = mid
    return par[1 + lo]


@njit(cache=True)
def _one_path(seed, i, u0, p, sigP, lamP, r, sigR, lamR, rho, delta,
              ckind, cpar, rkind, rpar, strat, b, mu, scheme, dt, t_max,
              bridge, ruined, rtime, rtype, sbefore, deficit, divs,
              errflag, errtime):
    s = np.empty(4, dtype=np.uint64)
    state_from_seed(seed, s)
    fb = np.empty(1)
    ub = fb.view(np.uint64)

    U = u0
    t = 0.0
    D = 0.0
    disc = 1.0
    edh = np.exp(-delta * dt)
    spare = 0.0
    have_spare = False
    rho2c = 1.0 - rho * rho
    pure_corr = rho2c == 0.0
    rtype_i = RT_NONE
    rt = t_max
    sb = 0.0
    df = 0.0
    done = False

    if strat == ST_BARRIER and U > b:
        D += U - b
        U = b
    if U <= 0.0 and sigP > 0.0:
        rtype_i = RT_OSC
        rt = 0.0
        done = True

    t_claim = t + (_exp_draw(s, fb, ub) / lamP if lamP > 0.0 else np.inf)
    t_ret = t + (_exp_draw(s, fb, ub) / lamR if lamR > 0.0 else np.inf)

    while not done and t < t_max - 1e-12:
        seg_end = min(min(t_claim, t_ret), t_max)
        while t < seg_end - 1e-12:
            rem = seg_end - t
            h = dt if rem > dt else rem
            sqh = np.sqrt(h)
            paying = strat == ST_THRESHOLD and U > b
            c0 = p - (mu if paying else 0.0)
            eh = edh if h == dt else np.exp(-delta * h)
            if paying:
                if delta > 0.0:
                    D += mu * disc * (1.0 - eh) / delta
                else:
                    D += mu * h
            if have_spare:
                z = spare
                have_spare = False
            else:
                z, spare = _normal_pair(s, fb, ub)
                have_spare = True
            aterm = sigP + rho * sigR * U
            if pure_corr:
                sig = np.abs(aterm)
                sig2 = sig * sig
            else:
                sig2 = aterm * aterm + sigR * sigR * rho2c * U * U
                sig = np.sqrt(sig2)
            if scheme == SC_EULER:
                Un = U + (c0 + r * U) * h + sig * sqh * z
            else:
                if have_spare:
                    z2 = spare
                    have_spare = False
                else:
                    z2, spare = _normal_pair(s, fb, ub)
                    have_spare = True
                dwp = sqh * z
                dwr = sqh * (rho * z + np.sqrt(rho2c) * z2)
                growth = np.exp((r - 0.5 * sigR * sigR) * h + sigR * dwr)
                Un = growth * (U + (c0 - rho * sigP * sigR) * h + sigP * dwp)
            tn = t + h
            disc *= eh
            if not np.isfinite(Un):
                errflag[i] = 1
                errtime[i] = tn
                return
            if Un <= 0.0:
                rtype_i = RT_OSC
                rt = tn
                U = 0.0
                t = tn
                done = True
                break
            if bridge and sig2 > 0.0:
                sig2h = sig2 * h
                if 2.0 * U * Un < BRIDGE_CUTOFF * sig2h:
                    if _bridge_hit(s, fb, ub, U, Un, sig2h):
                        rtype_i = RT_OSC
                        rt = t + 0.5 * h
                        U = 0.0
                        t = tn
                        done = True
                        break
            if strat == ST_BARRIER:
                if bridge and sig2 > 0.0:
                    # reflect against the within-step running maximum
                    # (naive end-of-step clamping undercounts dividends by
                    # O(sqrt(dt))); the max draw is skipped when crossing
                    # the barrier is beyond the probability cutoff
                    sig2h = sig2 * h
                    qb = 2.0 * (b - U) * (b - Un) / sig2h
                    if Un > b or U >= b or qb < BRIDGE_CUTOFF:
                        lv = _flog_scratch(_unit_open(next_u64(s), fb, ub), fb, ub)
                        arg = (Un - U) * (Un - U) - 2.0 * sig2h * lv
                        m_up = 0.5 * (U + Un + np.sqrt(arg))
                        if m_up > b:
                            D += (m_up - b) * disc
                            Un = Un - (m_up - b)
                            if Un <= 0.0:
                                rtype_i = RT_OSC
                                rt = tn
                                U = 0.0
                                t = tn
                                done = True
                                break
                elif Un > b:
                    D += (Un - b) * disc
                    Un = b
            U = Un
            t = tn
        if done or t >= t_max - 1e-12:
            break
        t = seg_end
        if t_claim <= t_ret:
            z = _sample_jump(ckind, cpar, s, fb, ub)
            pre = U
            U = U - z
            t_claim = t + _exp_draw(s, fb, ub) / lamP
            if U < 0.0:
                rtype_i = RT_CLAIM
                rt = t
                sb = pre
                df = -U
                done = True
            elif U == 0.0:
                # claim landing exactly on zero: oscillation by convention
                rtype_i = RT_OSC
                rt = t
                done = True
            elif strat == ST_BARRIER and U > b:
                D += (U - b) * disc
                U = b
        else:
            zr = _sample_jump(rkind, rpar, s, fb, ub)
            U = U * (1.0 + zr)
            t_ret = t + _exp_draw(s, fb, ub) / lamR
            if not np.isfinite(U):
                errflag[i] = 1
                errtime[i] = t
                return
            if strat == ST_BARRIER and U > b:
                D += (U - b) * disc
                U = b

    ruined[i] = 1 if done else 0
    rtime[i] = rt if done else t_max
    rtype[i] = rtype_i
    sbefore[i] = sb
    deficit[i] = df
    divs[i] = D


@njit(cache=True, parallel=True)
def run_paths(seeds, u0, p, sigP, lamP, r, sigR, lamR, rho, delta,
              ckind, cpar, rkind, rpar, strat, b, mu, scheme, dt, t_max,
              bridge, ruined, rtime, rtype, sbefore, deficit, divs,
              errflag, errtime):
    n = seeds.shape[0]
    for i in prange(n):
        _one_path(seeds[i], i, u0, p, sigP, lamP, r, sigR, lamR, rho, delta,
                  ckind, cpar, rkind, rpar, strat, b, mu, scheme, dt, t_max,
                  bridge, ruined, rtime, rtype, sbefore, deficit, divs,
                  errflag, errtime)


# ---------------------------------------------------------------------------
# blocked jump-free ruin kernel
# ---------------------------------------------------------------------------

@njit(cache=True)
def _ruin_block(seeds, lo, hi, u0, p, sigP, r, sigR, rho, dt, t_max, bridge,
                ruined, rtime, errflag, errtime):
    W = hi - lo
    s0 = np.empty(W, np.uint64)
    s1 = np.empty(W, np.uint64)
    s2 = np.empty(W, np.uint64)
    s3 = np.empty(W, np.uint64)
    idx = np.empty(W, np.int64)
    st = np.empty(4, np.uint64)
    for w in range(W):
        state_from_seed(seeds[lo + w], st)
        s0[w] = st[0]
        s1[w] = st[1]
        s2[w] = st[2]
        s3[w] = st[3]
        idx[w] = lo + w

    if u0 <= 0.0 and sigP > 0.0:
        for w in range(W):
            ruined[lo + w] = 1
            rtime[lo + w] = 0.0
        return

    U = np.full(W, u0)
    alive = np.ones(W)
    rt = np.full(W, t_max)
    uleft = np.empty(W)
    zc = np.empty(W)
    spare = np.empty(W)
    r1 = np.empty(W, np.uint64)
    r2 = np.empty(W, np.uint64)
    lg = np.empty(W)
    earr = np.empty(W)
    needq = np.empty(W, np.uint8)
    sxa = np.empty(W)
    b1f = np.empty(W)
    b1u = b1f.view(np.uint64)
    b2f = np.empty(W)
    b2u = b2f.view(np.uint64)
    fb1 = np.empty(1)
    ub1 = fb1.view(np.uint64)

    rho2c = 1.0 - rho * rho
    pure_corr = rho2c == 0.0
    t = 0.0
    k = 0
    wa = W
    while t < t_max - 1e-12:
        rem = t_max - t
        h = dt if rem > dt else rem
        sqh = np.sqrt(h)
        tn = t + h
        if (k & 1) == 0:
            # ---- phase 1: two raw u64 draws per lane
            for w in range(wa):
                x0 = s0[w]
                x1 = s1[w]
                x2 = s2[w]
                x3 = s3[w]
                a0 = (x0 + x3) & M64
                rr = ((((a0 << U64(23)) | (a0 >> U64(41))) & M64) + x0) & M64
                tt = (x1 << U64(17)) & M64
                x2 ^= x0
                x3 ^= x1
                x1 ^= x2
                x0 ^= x3
                x2 ^= tt
                x3 = ((x3 << U64(45)) | (x3 >> U64(19))) & M64
                r1[w] = rr
                a0 = (x0 + x3) & M64
                rr = ((((a0 << U64(23)) | (a0 >> U64(41))) & M64) + x0) & M64
                tt = (x1 << U64(17)) & M64
                x2 ^= x0
                x3 ^= x1
                x1 ^= x2
                x0 ^= x3
                x2 ^= tt
                x3 = ((x3 << U64(45)) | (x3 >> U64(19))) & M64
                r2[w] = rr
                s0[w] = x0
                s1[w] = x1
                s2[w] = x2
                s3[w] = x3
            # ---- phase 2: u1 in [2^-52, 1) and its log
            # (the divide and the polynomial live in separate loops: fused,
            # the loop fails to vectorize)
            for w in range(wa):
                b1u[w] = ((r1[w] >> U64(12)) | U64(1)) | EXP_ONE
            for w in range(wa):
                b2f[w] = b1f[w] - 1.0
            for w in range(wa):
                bits = b2u[w]
                earr[w] = np.float64(np.int32(bits >> U64(52)) - 1023)
                b2u[w] = (bits & MANT_MASK) | EXP_ONE
            for w in range(wa):
                m = b2f[w]
                big = m > SQRT2
                m = 0.5 * m if big else m
                earr[w] = earr[w] + (1.0 if big else 0.0)
                sxa[w] = (m - 1.0) / (m + 1.0)
            for w in range(wa):
                sx = sxa[w]
                ss = sx * sx
                poly = 2.0 + ss * (_L1 + ss * (_L2 + ss * (_L3 + ss * (_L4 + ss * (_L5 + ss * (_L6 + ss * _L7))))))
                lg[w] = sx * poly + earr[w] * LN2
            # ---- phase 3: sincos of 2 pi u2, assemble the pair
            for w in range(wa):
                b1u[w] = (r2[w] >> U64(12)) | EXP_ONE
            for w in range(wa):
                b2f[w] = b1f[w] - 1.0
            for w in range(wa):
                u2 = b2f[w]
                rad = np.sqrt(-2.0 * lg[w])
                c, sn = fsincos_turn(u2)
                zc[w] = rad * c
                spare[w] = rad * sn
            zarr = zc
        else:
            zarr = spare
        # ---- update sweep: unconditional stores; ruin is a rare event
        # handled by the scalar fixup pass, and lanes past their recorded
        # death keep evolving harmlessly until the next compaction
        if pure_corr:
            for w in range(wa):
                u = U[w]
                sig = np.abs(sigP + rho * sigR * u)
                un = u + (p + r * u) * h + sig * sqh * zarr[w]
                ev = (un <= 0.0) | (bridge & (2.0 * u * un < BRIDGE_CUTOFF * (sig * sig) * h))
                U[w] = un
                uleft[w] = u
                needq[w] = np.uint8(ev)
        else:
            for w in range(wa):
                u = U[w]
                aterm = sigP + rho * sigR * u
                sig2 = aterm * aterm + sigR * sigR * rho2c * u * u
                un = u + (p + r * u) * h + np.sqrt(sig2) * sqh * zarr[w]
                ev = (un <= 0.0) | (bridge & (2.0 * u * un < BRIDGE_CUTOFF * sig2 * h))
                U[w] = un
                uleft[w] = u
                needq[w] = np.uint8(ev)
        anyq = np.uint8(0)
        for w in range(wa):
            anyq |= needq[w]
        if anyq:
            for w in range(wa):
                if needq[w] == 1 and alive[w] == 1.0:
                    ul = uleft[w]
                    ur = U[w]
                    if not np.isfinite(ur):
                        errflag[idx[w]] = 1
                        errtime[idx[w]] = tn
                        rt[w] = tn
                        alive[w] = 0.0
                        U[w] = np.inf
                        continue
                    if ur <= 0.0:
                        rt[w] = tn
                        alive[w] = 0.0
                        U[w] = np.inf  # parked: the event test stays false
                        continue
                    if not bridge:
                        continue
                    st[0] = s0[w]
                    st[1] = s1[w]
                    st[2] = s2[w]
                    st[3] = s3[w]
                    aterm = sigP + rho * sigR * ul
                    if pure_corr:
                        sig2 = aterm * aterm
                    else:
                        sig2 = aterm * aterm + sigR * sigR * rho2c * ul * ul
                    if _bridge_hit(st, fb1, ub1, ul, ur, sig2 * h):
                        rt[w] = t + 0.5 * h
                        alive[w] = 0.0
                        U[w] = np.inf
                    s0[w] = st[0]
                    s1[w] = st[1]
                    s2[w] = st[2]
                    s3[w] = st[3]
        t = tn
        k += 1
        if (k % COMPACT_EVERY) == 0:
            na = 0
            for w in range(wa):
                if alive[w] == 1.0:
                    if na != w:
                        s0[na] = s0[w]
                        s1[na] = s1[w]
                        s2[na] = s2[w]
                        s3[na] = s3[w]
                        U[na] = U[w]
                        spare[na] = spare[w]
                        idx[na] = idx[w]
                        rt[na] = rt[w]
                        alive[na] = 1.0
                    na += 1
                else:
                    ruined[idx[w]] = 1
                    rtime[idx[w]] = rt[w]
            wa = na
            if wa == 0:
                return
    for w in range(wa):
        if alive[w] == 1.0:
            if not np.isfinite(U[w]):
                errflag[idx[w]] = 1
                errtime[idx[w]] = t_max
            ruined[idx[w]] = 0
            rtime[idx[w]] = t_max
        else:
            ruined[idx[w]] = 1
            rtime[idx[w]] = rt[w]


@njit(cache=True, parallel=True)
def run_ruin_blocked(seeds, u0, p, sigP, r, sigR, rho, dt, t_max, bridge,
                     lanes, ruined, rtime, errflag, errtime):
    n = seeds.shape[0]
    nblocks = (n + lanes - 1) // lanes
    for blk in prange(nblocks):
        lo = blk * lanes
        hi = min(n, lo + lanes)
        _ruin_block(seeds, lo, hi, u0, p, sigP, r, sigR, rho, dt, t_max,
                    bridge, ruined, rtime, errflag, errtime)
