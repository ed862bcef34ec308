"""Numba-accelerated hot kernels with a pure-numpy fallback.

The active engine is chosen at import time: numba when it is available
and CERTJULIA_NO_NUMBA is unset (or "0"), otherwise the numpy engine
from kernels_numpy.  Both engines execute the identical sequence of IEEE
double operations per lane, so verdicts and brackets are bit-identical;
test_kernels checks that and the kernel benchmark measures the speedup.
"""

from __future__ import annotations

import os

import numpy as np

from . import kernels_numpy
from .floatball import EPS_TERM, INFL
from .kernels_numpy import DEFL  # noqa: F401  (re-exported for tests)

_DISABLED = os.environ.get("CERTJULIA_NO_NUMBA", "") not in ("", "0")

try:
    from numba import njit, prange, set_num_threads as _numba_set_threads
    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False

NUMBA_ACTIVE = HAS_NUMBA and not _DISABLED


def set_num_threads(n: int) -> None:
    if NUMBA_ACTIVE and n >= 1:
        _numba_set_threads(n)


if NUMBA_ACTIVE:

    @njit(cache=True)
    def _horner_ball(cre, cim, crad, zx, zy, zr):
        d = cre.shape[0] - 1
        bre = cre[d]
        bim = cim[d]
        brad = crad[d]
        for k in range(d - 1, -1, -1):
            pre = bre * zx - bim * zy
            pim = bre * zy + bim * zx
            absa = abs(bre) + abs(bim)
            absb = abs(zx) + abs(zy)
            rad = (absa * zr + absb * brad + brad * zr
                   + EPS_TERM * (absa * absb + abs(pre) + abs(pim))) * INFL
            rre = pre + cre[k]
            rim = pim + cim[k]
            brad = (rad + crad[k] + EPS_TERM * (abs(rre) + abs(rim))) * INFL
            bre = rre
            bim = rim
        return bre, bim, brad

    @njit(cache=True)
    def _member_one(px, py, bitmap, ox, oy, scale):
        tx = px * scale
        ty = py * scale
        fx = np.floor(tx)
        fy = np.floor(ty)
        ix = np.int64(fx) - ox
        iy = np.int64(fy) - oy
        H, W = bitmap.shape
        on_x = tx == fx
        on_y = ty == fy
        for a in range(2):
            jx = ix - a
            if a == 1 and not on_x:
                break
            if jx < 0 or jx >= H:
                continue
            for b in range(2):
                jy = iy - b
                if b == 1 and not on_y:
                    break
                if jy < 0 or jy >= W:
                    continue
                if bitmap[jx, jy] != 0:
                    return True
        return False

    @njit(cache=True)
    def _probe_one(zx, zy, nre, nim, nrad, dre, dim_, drad,
                   L, q, thresholds, k2c_hi, k1_down, gapq_down,
                   bitmap, ox, oy, scale):
        px = zx
        py = zy
        prad = 0.0
        dl = 1.0
        dh = 1.0
        rad_cap = 0.25 * q
        width_cap = 0.5 * q
        for i in range(1, L + 1):
            vre, vim, vrad = _horner_ball(dre, dim_, drad, px, py, prad)
            mag = np.sqrt(vre * vre + vim * vim)
            ahi = (mag * (1.0 + EPS_TERM) + vrad) * INFL
            t = mag * (1.0 - EPS_TERM) - vrad
            if t < 0.0:
                t = 0.0
            alo = t * DEFL
            dl = (dl * alo) * DEFL
            dh = (dh * ahi) * INFL
            px, py, prad = _horner_ball(nre, nim, nrad, px, py, prad)
            if prad > rad_cap:
                return 1, np.int8(0), np.int8(0), i, 0.0, np.inf
            phx = np.rint(px / q) * q
            phy = np.rint(py / q) * q
            if not _member_one(phx, phy, bitmap, ox, oy, scale):
                if (dh - dl) > width_cap:
                    return 1, np.int8(0), np.int8(0), i, 0.0, np.inf
                dmid = np.rint(((dl + dh) * 0.5) / q) * q
                if dh > 0.0:
                    base_lo = (k1_down / dh) * DEFL
                else:
                    base_lo = 0.0
                if dl > 0.0:
                    base_hi = (k2c_hi[i] / dl) * INFL
                else:
                    base_hi = np.inf
                if dmid >= thresholds[i]:
                    hi = base_hi if base_hi < q else q
                    return 0, np.int8(0), np.int8(3), i, base_lo, hi
                lo = base_lo if base_lo > gapq_down else gapq_down
                return 0, np.int8(1), np.int8(4), i, lo, base_hi
        return 0, np.int8(0), np.int8(6), L, 0.0, q

    @njit(cache=True, parallel=True)
    def _probe_fill(zx, zy, nre, nim, nrad, dre, dim_, drad,
                    L, q, thresholds, k2c_hi, k1_down, gapq_down,
                    bitmap, ox, oy, scale,
                    status, bit, reason, iters, dlo, dhi):
        for t in prange(zx.shape[0]):
            s, b, r, i, lo, hi = _probe_one(
                zx[t], zy[t], nre, nim, nrad, dre, dim_, drad,
                L, q, thresholds, k2c_hi, k1_down, gapq_down,
                bitmap, ox, oy, scale)
            status[t] = s
            bit[t] = b
            reason[t] = r
            iters[t] = i
            dlo[t] = lo
            dhi[t] = hi

    def probe_batch(zx, zy, nre, nim, nrad, dre, dim_, drad,
                    L, q, thresholds, k2c_hi, k1_down, gapq_down,
                    bitmap, ox, oy, scale):
        n = zx.shape[0]
        status = np.zeros(n, dtype=np.int8)
        bit = np.zeros(n, dtype=np.int8)
        reason = np.zeros(n, dtype=np.int8)
        iters = np.zeros(n, dtype=np.int32)
        dlo = np.zeros(n)
        dhi = np.full(n, np.inf)
        _probe_fill(np.ascontiguousarray(zx, dtype=np.float64),
                    np.ascontiguousarray(zy, dtype=np.float64),
                    nre, nim, nrad, dre, dim_, drad,
                    L, q, thresholds, k2c_hi, k1_down, gapq_down,
                    bitmap, ox, oy, scale,
                    status, bit, reason, iters, dlo, dhi)
        return status, bit, reason, iters, dlo, dhi

    @njit(cache=True)
    def _escape_one(zx, zy, nre, nim, max_iter, r2):
        x = zx
        y = zy
        d = nre.shape[0] - 1
        for i in range(max_iter):
            if x * x + y * y > r2:
                return i
            bre = nre[d]
            bim = nim[d]
            for k in range(d - 1, -1, -1):
                pre = bre * x - bim * y
                pim = bre * y + bim * x
                bre = pre + nre[k]
                bim = pim + nim[k]
            x = bre
            y = bim
        return max_iter

    @njit(cache=True, parallel=True)
    def _escape_fill(zx, zy, nre, nim, max_iter, r2, counts):
        for t in prange(zx.shape[0]):
            counts[t] = _escape_one(zx[t], zy[t], nre, nim, max_iter, r2)

    def escape_batch(zx, zy, nre, nim, max_iter, r2):
        counts = np.zeros(zx.shape[0], dtype=np.int32)
        _escape_fill(np.ascontiguousarray(zx, dtype=np.float64),
                     np.ascontiguousarray(zy, dtype=np.float64),
                     nre, nim, max_iter, r2, counts)
        return counts

    @njit(cache=True)
    def _dem_one(zx, zy, nre, nim, dre, dim_, max_iter, r2):
        x = zx
        y = zy
        dx = 1.0
        dy = 0.0
        d = nre.shape[0] - 1
        for i in range(max_iter):
            m2 = x * x + y * y
            if m2 > r2:
                mod = np.sqrt(m2)
                dmod = np.sqrt(dx * dx + dy * dy)
                if dmod > 0.0:
                    return 0.5 * mod * np.log(mod) / dmod
                return -1.0
            bre = dre[d - 1]
            bim = dim_[d - 1]
            for k in range(d - 2, -1, -1):
                pre = bre * x - bim * y
                pim = bre * y + bim * x
                bre = pre + dre[k]
                bim = pim + dim_[k]
            ndx = bre * dx - bim * dy
            ndy = bre * dy + bim * dx
            dx = ndx
            dy = ndy
            bre = nre[d]
            bim = nim[d]
            for k in range(d - 1, -1, -1):
                pre = bre * x - bim * y
                pim = bre * y + bim * x
                bre = pre + nre[k]
                bim = pim + nim[k]
            x = bre
            y = bim
        return -1.0

    @njit(cache=True, parallel=True)
    def _dem_fill(zx, zy, nre, nim, dre, dim_, max_iter, r2, out):
        for t in prange(zx.shape[0]):
            out[t] = _dem_one(zx[t], zy[t], nre, nim, dre, dim_, max_iter, r2)

    def dem_batch(zx, zy, nre, nim, dre, dim_, max_iter, r2):
        out = np.zeros(zx.shape[0])
        _dem_fill(np.ascontiguousarray(zx, dtype=np.float64),
                  np.ascontiguousarray(zy, dtype=np.float64),
                  nre, nim, dre, dim_, max_iter, r2, out)
        return out

else:
    probe_batch = kernels_numpy.probe_batch
    escape_batch = kernels_numpy.escape_batch
    dem_batch = kernels_numpy.dem_batch


def engine_name() -> str:
    return "numba" if NUMBA_ACTIVE else "numpy"
