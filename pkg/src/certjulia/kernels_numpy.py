"""Pure-numpy engine for the hot per-point kernels.

This is both the fallback when numba is disabled (CERTJULIA_NO_NUMBA=1)
and the reference the numba engine is checked against: both engines run
the identical sequence of IEEE double operations per lane, so their
outputs are bit-identical.

The verdict kernel runs the certified decision loop in float64 ball
arithmetic.  Centers of float64 balls are exact dyadic rationals, so this
is a conforming implementation of the dyadic decision procedure; lanes
whose ball widths exceed the precision contract are flagged NEED_EXACT
and re-run by the caller on the big-integer engine.
"""

from __future__ import annotations

import numpy as np

from .floatball import EPS_TERM, INFL, ball_abs_bounds, poly_eval_ball

DEFL = 1.0 - 2.0**-40

STATUS_OK = 0
STATUS_NEED_EXACT = 1

REASON_STEP3 = 3
REASON_STEP4 = 4
REASON_STEP6 = 6
REASON_OUTSIDE_U = 7
REASON_COARSE = 8


def member_batch(px, py, bitmap, ox, oy, scale):
    """Exact closed-box membership for grid-aligned float coordinates.

    Scaling by the power of two `scale` is exact in IEEE arithmetic, so
    the floor and the on-grid-line comparisons are exact; points on grid
    lines count as inside when any adjacent box is present.
    """
    tx = px * scale
    ty = py * scale
    fx = np.floor(tx)
    fy = np.floor(ty)
    on_x = tx == fx
    on_y = ty == fy
    ix = fx.astype(np.int64) - ox
    iy = fy.astype(np.int64) - oy
    H, W = bitmap.shape

    def look(ix_, iy_):
        good = (ix_ >= 0) & (ix_ < H) & (iy_ >= 0) & (iy_ < W)
        out = np.zeros(ix_.shape, dtype=bool)
        out[good] = bitmap[ix_[good], iy_[good]] != 0
        return out

    inside = look(ix, iy)
    inside |= on_x & look(ix - 1, iy)
    inside |= on_y & look(ix, iy - 1)
    inside |= on_x & on_y & look(ix - 1, iy - 1)
    return inside


def probe_batch(zx, zy, nre, nim, nrad, dre, dim_, drad,
                L, q, thresholds, k2c_hi, k1_down, gapq_down,
                bitmap, ox, oy, scale):
    """Certified verdict loop over a batch of points inside U.

    Returns (status, bit, reason, iters, dlo, dhi) arrays.  dlo/dhi are a
    certified bracket on the distance to the Julia set (dlo may be 0 and
    dhi may be inf when an exit carries no bound in that direction).
    """
    n = zx.shape[0]
    px = zx.astype(np.float64).copy()
    py = zy.astype(np.float64).copy()
    prad = np.zeros(n)
    dl = np.ones(n)
    dh = np.ones(n)
    status = np.zeros(n, dtype=np.int8)
    bit = np.zeros(n, dtype=np.int8)
    reason = np.zeros(n, dtype=np.int8)
    iters = np.zeros(n, dtype=np.int32)
    dlo_out = np.zeros(n)
    dhi_out = np.full(n, np.inf)
    alive = np.ones(n, dtype=bool)

    rad_cap = 0.25 * q
    width_cap = 0.5 * q

    for i in range(1, L + 1):
        if not alive.any():
            break
        a = alive
        vre, vim, vrad = poly_eval_ball(dre, dim_, drad, px[a], py[a], prad[a])
        alo, ahi = ball_abs_bounds(vre, vim, vrad)
        dl[a] = (dl[a] * alo) * DEFL
        dh[a] = (dh[a] * ahi) * INFL
        wre, wim, wrad = poly_eval_ball(nre, nim, nrad, px[a], py[a], prad[a])
        px[a] = wre
        py[a] = wim
        prad[a] = wrad

        # the p-radius bounds the membership slack at every step; the
        # derivative width only matters where the approximant is consulted,
        # at an exit comparison, so it is checked lazily there
        too_wide = np.zeros(n, dtype=bool)
        too_wide[a] = wrad > rad_cap
        status[too_wide] = STATUS_NEED_EXACT
        iters[too_wide] = i
        alive &= ~too_wide
        a = alive
        if not a.any():
            break

        phx = np.rint(px[a] / q) * q
        phy = np.rint(py[a] / q) * q
        inside = member_batch(phx, phy, bitmap, ox, oy, scale)

        exited = np.zeros(n, dtype=bool)
        exited[a] = ~inside
        if exited.any():
            d_wide = np.zeros(n, dtype=bool)
            d_wide[exited] = (dh[exited] - dl[exited]) > width_cap
            status[exited & d_wide] = STATUS_NEED_EXACT
            iters[exited & d_wide] = i
            exited &= ~d_wide
            alive &= ~d_wide
        if exited.any():
            e = exited
            dmid = np.rint(((dl[e] + dh[e]) * 0.5) / q) * q
            is3 = dmid >= thresholds[i]
            bit[e] = np.where(is3, 0, 1).astype(np.int8)
            reason[e] = np.where(is3, REASON_STEP3, REASON_STEP4).astype(np.int8)
            iters[e] = i
            base_lo = np.where(dh[e] > 0.0, (k1_down / dh[e]) * DEFL, 0.0)
            dlo_out[e] = np.where(is3, base_lo, np.maximum(base_lo, gapq_down))
            base_hi = np.where(dl[e] > 0.0, (k2c_hi[i] / dl[e]) * INFL, np.inf)
            dhi_out[e] = np.where(is3, np.minimum(base_hi, q), base_hi)
            alive &= ~exited

    # loop exhausted: certified close
    if alive.any():
        bit[alive] = 0
        reason[alive] = REASON_STEP6
        iters[alive] = L
        dlo_out[alive] = 0.0
        dhi_out[alive] = q
    return status, bit, reason, iters, dlo_out, dhi_out


def escape_batch(zx, zy, nre, nim, max_iter, r2):
    """Classic escape-time counts (uncertified)."""
    x = zx.astype(np.float64).copy()
    y = zy.astype(np.float64).copy()
    counts = np.full(zx.shape, max_iter, dtype=np.int32)
    alive = np.ones(zx.shape, dtype=bool)
    d = len(nre) - 1
    for i in range(max_iter):
        a = alive
        if not a.any():
            break
        esc = np.zeros(zx.shape, dtype=bool)
        esc[a] = x[a] * x[a] + y[a] * y[a] > r2
        counts[esc] = i
        alive &= ~esc
        a = alive
        bre = np.full(int(a.sum()), nre[d])
        bim = np.full(int(a.sum()), nim[d])
        xa, ya = x[a], y[a]
        for k in range(d - 1, -1, -1):
            pre = bre * xa - bim * ya
            pim = bre * ya + bim * xa
            bre = pre + nre[k]
            bim = pim + nim[k]
        x[a] = bre
        y[a] = bim
    return counts


def dem_batch(zx, zy, nre, nim, dre, dim_, max_iter, r2):
    """Distance-estimator values (uncertified): 0.5*|z|*log|z|/|z'| at the
    escape moment, -1.0 for points that never escape."""
    x = zx.astype(np.float64).copy()
    y = zy.astype(np.float64).copy()
    dx = np.ones(zx.shape)
    dy = np.zeros(zx.shape)
    out = np.full(zx.shape, -1.0)
    alive = np.ones(zx.shape, dtype=bool)
    d = len(nre) - 1
    for i in range(max_iter):
        a = alive
        if not a.any():
            break
        m2 = np.zeros(zx.shape)
        m2[a] = x[a] * x[a] + y[a] * y[a]
        esc = np.zeros(zx.shape, dtype=bool)
        esc[a] = m2[a] > r2
        if esc.any():
            e = esc
            mod = np.sqrt(m2[e])
            dmod = np.sqrt(dx[e] * dx[e] + dy[e] * dy[e])
            val = np.where(dmod > 0.0, 0.5 * mod * np.log(mod) / dmod, -1.0)
            out[e] = val
            alive &= ~esc
        a = alive
        if not a.any():
            break
        xa, ya = x[a], y[a]
        # derivative accumulator first (chain rule uses the old z)
        bre = np.full(int(a.sum()), dre[d - 1] if d >= 1 else 0.0)
        bim = np.full(int(a.sum()), dim_[d - 1] if d >= 1 else 0.0)
        for k in range(d - 2, -1, -1):
            pre = bre * xa - bim * ya
            pim = bre * ya + bim * xa
            bre = pre + dre[k]
            bim = pim + dim_[k]
        ndx = bre * dx[a] - bim * dy[a]
        ndy = bre * dy[a] + bim * dx[a]
        dx[a] = ndx
        dy[a] = ndy
        bre = np.full(int(a.sum()), nre[d])
        bim = np.full(int(a.sum()), nim[d])
        for k in range(d - 1, -1, -1):
            pre = bre * xa - bim * ya
            pim = bre * ya + bim * xa
            bre = pre + nre[k]
            bim = pim + nim[k]
        x[a] = bre
        y[a] = bim
    return out
