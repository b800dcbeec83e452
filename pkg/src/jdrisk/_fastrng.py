"""Inline RNG and math primitives for the numba path kernels.

Per-replicate streams are xoshiro256++ generators keyed by 64-bit seeds that
the caller derives from the master seed with numpy's SeedSequence (a
counter-style split: seed word i belongs to replicate i).  Normals come from
Box-Muller with a cached spare; log and sincos are polynomial so the blocked
kernel's lane loops stay vectorizable (no scalar libm calls).

Uniform draws are built by stuffing 52 random mantissa bits into [1, 2) and
subtracting 1; draws that feed a log are forced odd in the last mantissa bit
so they can never be exactly zero (this truncates the normal tail at about
8.5 sigma, far below Monte Carlo resolution).
"""

from __future__ import annotations

import numpy as np
from numba import njit

U64 = np.uint64
M64 = U64(0xFFFFFFFFFFFFFFFF)
EXP_ONE = U64(0x3FF0000000000000)
MANT_MASK = U64(0x000FFFFFFFFFFFFF)

SQRT2 = 1.4142135623730951
LN2 = 0.6931471805599453
PIO2 = 1.5707963267948966
SQRT_HALF = 0.7071067811865476
TWO_PI = 6.283185307179586

# minimax sin/cos coefficients on [-pi/4, pi/4] (double precision)
_S1 = -1.66666666666666307295e-1
_S2 = 8.33333333332211858878e-3
_S3 = -1.98412698295895385996e-4
_S4 = 2.75573136213857245213e-6
_S5 = -2.50507477628578072866e-8
_S6 = 1.58962301576546568060e-10
_C1 = 4.16666666666665929218e-2
_C2 = -1.38888888888730564116e-3
_C3 = 2.48015872888517179954e-5
_C4 = -2.75573141792967388112e-7
_C5 = 2.08757008419747316778e-9
_C6 = -1.13585365213876817300e-11

# atanh-series coefficients for log on [sqrt(1/2), sqrt(2)]
_L0 = 2.0
_L1 = 0.6666666666666735
_L2 = 0.3999999999940942
_L3 = 0.2857142874366239
_L4 = 0.22222198432149784
_L5 = 0.1818357216161805
_L6 = 0.15313837699209373
_L7 = 0.14798198605116586


@njit(inline="always", cache=True)
def splitmix64(z):
    z = (z + U64(0x9E3779B97F4A7C15)) & M64
    z = ((z ^ (z >> U64(30))) * U64(0xBF58476D1CE4E5B9)) & M64
    z = ((z ^ (z >> U64(27))) * U64(0x94D049BB133111EB)) & M64
    return z ^ (z >> U64(31))


@njit(inline="always", cache=True)
def state_from_seed(seed, s):
    """Expand a 64-bit key into a nonzero 4-word xoshiro256++ state."""
    z = seed
    z = splitmix64(z)
    s[0] = z
    z = splitmix64(z)
    s[1] = z
    z = splitmix64(z)
    s[2] = z
    z = splitmix64(z)
    s[3] = z


@njit(inline="always", cache=True)
def next_u64(s):
    a0 = (s[0] + s[3]) & M64
    out = ((((a0 << U64(23)) | (a0 >> U64(41))) & M64) + s[0]) & M64
    t = (s[1] << U64(17)) & M64
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = ((s[3] << U64(45)) | (s[3] >> U64(19))) & M64
    return out


@njit(cache=True)
def _log_poly(m, efloat):
    """log(m * 2^e) for m in [sqrt(1/2), sqrt(2)]."""
    s = (m - 1.0) / (m + 1.0)
    ss = s * s
    poly = _L0 + ss * (_L1 + ss * (_L2 + ss * (_L3 + ss * (_L4 + ss * (_L5 + ss * (_L6 + ss * _L7))))))
    return s * poly + efloat * LN2


@njit(cache=True)
def flog(x, fbuf, ubuf):
    """Natural log for x in (0, 1]; fbuf/ubuf are 1-element scratch views."""
    fbuf[0] = x
    b = ubuf[0]
    e32 = np.int32(b >> U64(52)) - 1023
    ubuf[0] = (b & MANT_MASK) | EXP_ONE
    m = fbuf[0]
    big = m > SQRT2
    m = 0.5 * m if big else m
    ef = np.float64(e32) + (1.0 if big else 0.0)
    return _log_poly(m, ef)


@njit(cache=True)
def fsincos_turn(u2):
    """(cos, sin) of 2*pi*u2 for u2 in [0, 1), via exact turn-space reduction."""
    tq = 4.0 * u2
    q = np.int32(tq)
    r = (tq - np.float64(q) - 0.5) * PIO2
    r2 = r * r
    sp = _S1 + r2 * (_S2 + r2 * (_S3 + r2 * (_S4 + r2 * (_S5 + r2 * _S6))))
    sv = r + r * r2 * sp
    cp = _C1 + r2 * (_C2 + r2 * (_C3 + r2 * (_C4 + r2 * (_C5 + r2 * _C6))))
    cv = 1.0 - 0.5 * r2 + r2 * r2 * cp
    ec = 1.0 - np.float64((q + 1) & 2)
    es = 1.0 - np.float64(q & 2)
    return SQRT_HALF * (ec * cv - es * sv), SQRT_HALF * (es * cv + ec * sv)


@njit(cache=True)
def raw_to_unit_open(r, fbuf, ubuf):
    ubuf[0] = ((r >> U64(12)) | U64(1)) | EXP_ONE
    return fbuf[0] - 1.0


@njit(cache=True)
def raw_to_unit(r, fbuf, ubuf):
    ubuf[0] = (r >> U64(12)) | EXP_ONE
    return fbuf[0] - 1.0


# ------------------------------------------------------------------ testing
# Thin wrappers so the unit tests can exercise the inline primitives.

@njit(cache=True)
def sample_uniforms(seed, n):
    out = np.empty(n)
    s = np.empty(4, dtype=np.uint64)
    state_from_seed(seed, s)
    fbuf = np.empty(1)
    ubuf = fbuf.view(np.uint64)
    for i in range(n):
        out[i] = raw_to_unit(next_u64(s), fbuf, ubuf)
    return out


@njit(cache=True)
def sample_normals(seed, n):
    out = np.empty(n)
    s = np.empty(4, dtype=np.uint64)
    state_from_seed(seed, s)
    fbuf = np.empty(1)
    ubuf = fbuf.view(np.uint64)
    spare = 0.0
    have = False
    for i in range(n):
        if have:
            out[i] = spare
            have = False
        else:
            u1 = raw_to_unit_open(next_u64(s), fbuf, ubuf)
            u2 = raw_to_unit(next_u64(s), fbuf, ubuf)
            rad = np.sqrt(-2.0 * flog(u1, fbuf, ubuf))
            c, sn = fsincos_turn(u2)
            out[i] = rad * c
            spare = rad * sn
            have = True
    return out


@njit(cache=True)
def log_accuracy_probe(xs):
    out = np.empty(xs.shape[0])
    fbuf = np.empty(1)
    ubuf = fbuf.view(np.uint64)
    for i in range(xs.shape[0]):
        out[i] = flog(xs[i], fbuf, ubuf)
    return out


@njit(cache=True)
def sincos_accuracy_probe(us):
    out = np.empty((us.shape[0], 2))
    for i in range(us.shape[0]):
        c, s = fsincos_turn(us[i])
        out[i, 0] = c
        out[i, 1] = s
    return out
