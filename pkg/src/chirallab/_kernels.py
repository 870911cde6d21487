"""Compiled inner loops (numba) for sampling and small-matrix propagation.

Everything here works on plain arrays.  The public modules wrap these
functions; the numpy paths in ``transfer`` serve as reference.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

_C1 = np.uint64(0xBF58476D1CE4E5B9)
_C2 = np.uint64(0x94D049BB133111EB)
_G = np.uint64(0x9E3779B97F4A7C15)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_S54 = np.uint64(54)
_LOW43 = np.uint64((1 << 43) - 1)
_TWO_M53 = 2.0 ** -53
_TWO_M43 = 2.0 ** -43

# phase table: exp(2 pi i k / 1024)
_PHASE = np.exp(2j * np.pi * np.arange(1024) / 1024)
_PHASE_COS = np.ascontiguousarray(_PHASE.real)
_PHASE_SIN = np.ascontiguousarray(_PHASE.imag)
_STEP = 2.0 * math.pi / 1024.0

OK = 0
RANK_DEFICIENT = 1

_FAST = dict(cache=True, fastmath=True)


@njit(cache=True, inline="always")
def _mix(z):
    z = (z ^ (z >> _S30)) * _C1
    z = (z ^ (z >> _S27)) * _C2
    return z ^ (z >> _S31)


@njit(cache=True, inline="always")
def _unit(w):
    return (float(w >> _S11) + 0.5) * _TWO_M53


@njit(**_FAST)
def _normals(keys, start, count, tc, ts, scale):
    m = keys.shape[0]
    out = np.empty((m, count), dtype=np.complex128)
    for i in range(m):
        key = keys[i]
        for c in range(count):
            j = np.uint64(2 * (start + c) + 1)
            u1 = _unit(_mix(key + j * _G))
            w2 = _mix(key + (j + np.uint64(1)) * _G)
            # phase 2 pi u2 with u2 = (k + f) / 1024: table entry k rotated by
            # 2 pi f / 1024 < 0.0062 (Taylor terms below 1e-22)
            k = int(w2 >> _S54)
            d = _STEP * ((float((w2 >> _S11) & _LOW43) + 0.5) * _TWO_M43)
            d2 = d * d
            cd = 1.0 - d2 * (0.5 - d2 * (1.0 / 24.0 - d2 * (1.0 / 720.0)))
            sd = d * (1.0 - d2 * (1.0 / 6.0 - d2 * (1.0 / 120.0 - d2 * (1.0 / 5040.0))))
            r = scale * math.sqrt(-math.log(u1))
            out[i, c] = complex(r * (tc[k] * cd - ts[k] * sd), r * (ts[k] * cd + tc[k] * sd))
    return out


def complex_normals(keys, start, count, scale=1.0):
    return _normals(keys, start, count, _PHASE_COS, _PHASE_SIN, float(scale))


def sigma_lower_bounds(blocks):
    return lu_adjoint(blocks)[2]


@njit(**_FAST)
def lu_adjoint(blocks):
    """Partial-pivoted LU of T^* for a stack of blocks.

    Returns ``(lu, piv, lower)`` with LAPACK-style row interchanges and
    ``lower = |det T| / ||T||_F^(n-1)``, a lower bound on sigma_min(T).
    ``lower`` is 0 when a pivot vanishes.  Real and imaginary parts are
    kept apart in the loops so that they vectorize.
    """
    m, n = blocks.shape[0], blocks.shape[1]
    lu = np.empty((m, n, n), dtype=np.complex128)
    piv = np.empty((m, n), dtype=np.int64)
    lower = np.empty(m)
    ar = np.empty((n, n))
    ai = np.empty((n, n))
    for b in range(m):
        fro = 0.0
        for i in range(n):
            for j in range(n):
                v = blocks[b, j, i]
                ar[i, j] = v.real
                ai[i, j] = -v.imag
                fro += v.real * v.real + v.imag * v.imag
        logdet = 0.0
        zero = False
        for c in range(n):
            p = c
            best = abs(ar[c, c]) + abs(ai[c, c])
            for i in range(c + 1, n):
                v = abs(ar[i, c]) + abs(ai[i, c])
                if v > best:
                    best = v
                    p = i
            piv[b, c] = p
            if best == 0.0:
                zero = True
                for cc in range(c + 1, n):
                    piv[b, cc] = cc
                break
            if p != c:
                for j in range(n):
                    t = ar[c, j]
                    ar[c, j] = ar[p, j]
                    ar[p, j] = t
                    t = ai[c, j]
                    ai[c, j] = ai[p, j]
                    ai[p, j] = t
            pr = ar[c, c]
            pi = ai[c, c]
            m2 = pr * pr + pi * pi
            logdet += 0.5 * math.log(m2)
            ir = pr / m2
            ii = -pi / m2
            for i in range(c + 1, n):
                fr = ar[i, c] * ir - ai[i, c] * ii
                fi = ar[i, c] * ii + ai[i, c] * ir
                ar[i, c] = fr
                ai[i, c] = fi
                for j in range(c + 1, n):
                    ar[i, j] -= fr * ar[c, j] - fi * ai[c, j]
                    ai[i, j] -= fr * ai[c, j] + fi * ar[c, j]
        for i in range(n):
            for j in range(n):
                lu[b, i, j] = complex(ar[i, j], ai[i, j])
        if zero or fro == 0.0:
            lower[b] = 0.0
        else:
            lower[b] = math.exp(logdet - 0.5 * (n - 1) * math.log(fro))
    return lu, piv, lower


@njit(**_FAST)
def _lu_solve(a, piv, xr, xi):
    """In place: x <- (T^*)^-1 x given the factors of T^*; x split as (xr, xi)."""
    n = a.shape[0]
    k = xr.shape[1]
    for c in range(n):
        p = piv[c]
        if p != c:
            for j in range(k):
                t = xr[c, j]
                xr[c, j] = xr[p, j]
                xr[p, j] = t
                t = xi[c, j]
                xi[c, j] = xi[p, j]
                xi[p, j] = t
    for c in range(n):
        for i in range(c + 1, n):
            fr = a[i, c].real
            fi = a[i, c].imag
            for j in range(k):
                xr[i, j] -= fr * xr[c, j] - fi * xi[c, j]
                xi[i, j] -= fr * xi[c, j] + fi * xr[c, j]
    for c in range(n - 1, -1, -1):
        for i in range(c + 1, n):
            fr = a[c, i].real
            fi = a[c, i].imag
            for j in range(k):
                xr[c, j] -= fr * xr[i, j] - fi * xi[i, j]
                xi[c, j] -= fr * xi[i, j] + fi * xr[i, j]
        inv = 1.0 / a[c, c]
        ir = inv.real
        ii = inv.imag
        for j in range(k):
            t = xr[c, j]
            xr[c, j] = ir * t - ii * xi[c, j]
            xi[c, j] = ir * xi[c, j] + ii * t


@njit(**_FAST)
def _matmul(a, br, bi, out_r, out_i):
    """out = a @ b for complex ``a`` and split ``b``."""
    n, m = a.shape
    k = br.shape[1]
    for i in range(n):
        for j in range(k):
            out_r[i, j] = 0.0
            out_i[i, j] = 0.0
        for l in range(m):
            ar = a[i, l].real
            ai = a[i, l].imag
            for j in range(k):
                out_r[i, j] += ar * br[l, j] - ai * bi[l, j]
                out_i[i, j] += ar * bi[l, j] + ai * br[l, j]


@njit(**_FAST)
def _deflate(fr, fi, log_sums):
    """In-place Gram-Schmidt (two passes) of the columns of ``fr + i fi``.

    Adds log of the R diagonal to ``log_sums``; returns a status code.
    Columns are copied to contiguous rows first so the inner loops vectorize.
    """
    d, k = fr.shape
    cr = np.empty((k, d))
    ci = np.empty((k, d))
    for r in range(d):
        for j in range(k):
            cr[j, r] = fr[r, j]
            ci[j, r] = fi[r, j]
    status = OK
    for j in range(k):
        for _ in range(2):
            for i in range(j):
                sr = 0.0
                si = 0.0
                for r in range(d):
                    sr += cr[i, r] * cr[j, r] + ci[i, r] * ci[j, r]
                    si += cr[i, r] * ci[j, r] - ci[i, r] * cr[j, r]
                for r in range(d):
                    cr[j, r] -= sr * cr[i, r] - si * ci[i, r]
                    ci[j, r] -= sr * ci[i, r] + si * cr[i, r]
        nrm = 0.0
        for r in range(d):
            nrm += cr[j, r] * cr[j, r] + ci[j, r] * ci[j, r]
        nrm = math.sqrt(nrm)
        if not nrm > 1e-300:
            status = RANK_DEFICIENT
            break
        log_sums[j] += math.log(nrm)
        inv = 1.0 / nrm
        for r in range(d):
            cr[j, r] *= inv
            ci[j, r] *= inv
    for r in range(d):
        for j in range(k):
            fr[r, j] = cr[j, r]
            fi[r, j] = ci[j, r]
    return status


@njit(cache=True)
def _split(src, fr, fi):
    for i in range(fr.shape[0]):
        for j in range(fr.shape[1]):
            fr[i, j] = src[i, j].real
            fi[i, j] = src[i, j].imag


@njit(cache=True)
def _join(fr, fi, dst):
    for i in range(fr.shape[0]):
        for j in range(fr.shape[1]):
            dst[i, j] = complex(fr[i, j], fi[i, j])


@njit(**_FAST)
def sector_propagate(hop, lu, piv, frames, log_sums, group):
    """Zero-energy sector steps for one chunk.

    ``hop`` has shape (2C+1, R, n, n) and holds T at sites 2x .. 2x+2C for
    the chunk's first step x; ``lu``, ``piv`` are the factors of T^* from
    :func:`lu_adjoint` (same leading axes).  ``frames`` (2, R, n, k) and
    ``log_sums`` (2, R, k) are updated in place.  Sector 0 applies
    -T_{2x+1}° T_{2x}, sector 1 applies -T_{2x+2}° T_{2x+1}.  Frames are
    deflated every ``group`` steps and at the end of the chunk.
    """
    steps = (hop.shape[0] - 1) // 2
    n_real = hop.shape[1]
    n = hop.shape[2]
    k = frames.shape[3]
    fr = np.empty((n, k))
    fi = np.empty((n, k))
    yr = np.empty((n, k))
    yi = np.empty((n, k))
    for s in range(2):
        for r in range(n_real):
            _split(frames[s, r], fr, fi)
            for step in range(steps):
                first = 2 * step + s
                _matmul(hop[first, r], fr, fi, yr, yi)
                _lu_solve(lu[first + 1, r], piv[first + 1, r], yr, yi)
                # swap buffers; the sign of the map does not affect the exponents
                fr, yr = yr, fr
                fi, yi = yi, fi
                if (step + 1) % group == 0 or step == steps - 1:
                    if _deflate(fr, fi, log_sums[s, r]) != OK:
                        return RANK_DEFICIENT
            _join(fr, fi, frames[s, r])
    return OK


@njit(**_FAST)
def full_propagate(hop, lu, piv, onsite, z, frames, log_sums, group):
    """Transfer steps A_n(z) for one chunk.

    ``hop``, ``onsite`` (C, R, n, n) (onsite zeros for the chiral model),
    factors of T^* as in :func:`sector_propagate`, ``frames`` (R, 2n, k).
    One step maps (top, bottom) to ((z - V) T° top - T bottom, T° top).
    """
    steps = hop.shape[0]
    n_real = hop.shape[1]
    n = hop.shape[2]
    k = frames.shape[2]
    zr = z.real
    zi = z.imag
    fr = np.empty((2 * n, k))
    fi = np.empty((2 * n, k))
    wr = np.empty((n, k))
    wi = np.empty((n, k))
    vr = np.empty((n, k))
    vi = np.empty((n, k))
    tr = np.empty((n, k))
    ti = np.empty((n, k))
    for r in range(n_real):
        _split(frames[r], fr, fi)
        for step in range(steps):
            for i in range(n):
                for j in range(k):
                    wr[i, j] = fr[i, j]
                    wi[i, j] = fi[i, j]
            _lu_solve(lu[step, r], piv[step, r], wr, wi)
            _matmul(onsite[step, r], wr, wi, vr, vi)
            _matmul(hop[step, r], fr[n:], fi[n:], tr, ti)
            for i in range(n):
                for j in range(k):
                    fr[i, j] = zr * wr[i, j] - zi * wi[i, j] - vr[i, j] - tr[i, j]
                    fi[i, j] = zr * wi[i, j] + zi * wr[i, j] - vi[i, j] - ti[i, j]
                    fr[n + i, j] = wr[i, j]
                    fi[n + i, j] = wi[i, j]
            if (step + 1) % group == 0 or step == steps - 1:
                if _deflate(fr, fi, log_sums[r]) != OK:
                    return RANK_DEFICIENT
        _join(fr, fi, frames[r])
    return OK
