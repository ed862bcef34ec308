"""The certified decision engine.

The core loop follows the precision-indexed verdict procedure: iterate
the map from the query point with approximants at precision
min(2**-(n+1), eps); while the orbit stays in U keep going (up to L(n)
steps); at the first exit compare the derivative-magnitude approximant
against the distortion threshold and answer.  Inside the engine the bit
semantics are: 0 certifies d(z, J) <= 2**-(n+1) (close), 1 certifies
d(z, J) >= K(n) * 2**-(n+1) (not too close).  The pixel layer inverts
this into fill/blank pixel bits.

Two conforming engines are provided: an exact big-integer ball engine,
and a float64 ball engine (numba or numpy kernels) whose lanes fall back
to the exact engine whenever their ball widths exceed the precision
contract.  Every exit also yields a certified distance bracket, which the
pixel resolver uses to excise provably-set-free squares instead of
probing a dense sample grid; the dense grid is the provable worst case
and the floor of the adaptive subdivision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .certificate import Certificate, L_of, gap_K, pow_sqrt_hi, threshold
from .cover import contains, dist_lower
from .dyadic import ComplexDyadic, Dyadic, dmin
from .errors import InvalidConstants, PrecisionExhausted
from .kernels_numpy import (
    REASON_COARSE,
    REASON_OUTSIDE_U,
    REASON_STEP3,
    REASON_STEP4,
    REASON_STEP6,
    member_batch,
)
from .maps import MapSpec, orbit_iter

__all__ = [
    "Verdict",
    "subprogram",
    "decide_far_outside_U",
    "decide_point",
    "pixel_value",
    "coarse_pixel_value",
    "resolve_pixels",
    "ResolveStats",
    "REASON_NAMES",
]

REASON_NAMES = {
    REASON_STEP3: "ExitStep3",
    REASON_STEP4: "ExitStep4",
    REASON_STEP6: "ExitStep6",
    REASON_OUTSIDE_U: "OutsideU",
    REASON_COARSE: "CoarseCover",
}

SQRT2_UP = 1.4142135623730951  # correctly-rounded sqrt(2) lies above sqrt(2)
INFL = 1.0 + 2.0**-40
DEFL = 1.0 - 2.0**-40


@dataclass
class Verdict:
    """Outcome of one subprogram (or routed) decision."""

    bit: int
    reason: str
    iterations_used: int
    max_work_bits: int
    dist_lo: Dyadic | None = None
    dist_hi: Dyadic | None = None

    def __post_init__(self):
        if self.bit not in (0, 1):
            raise InvalidConstants("verdict bit must be 0 or 1")


# ----------------------------------------------------------------------
# probe context: everything one precision level needs, in both exact and
# float64 form


class ProbeContext:
    def __init__(self, cert: Certificate, map_spec: MapSpec, nu: int):
        if nu < cert.n0:
            raise InvalidConstants(f"precision level {nu} below n0={cert.n0}")
        self.cert = cert
        self.map = map_spec
        self.nu = nu
        self.L = L_of(cert, nu)
        self.qbits = nu + 1
        self.q_dy = Dyadic(1, -(nu + 1))
        self.q_f = 2.0 ** -(nu + 1)
        self.thresholds_dy = [None] + [threshold(cert, i, nu)
                                       for i in range(1, self.L + 1)]
        self.k2c_dy = [None] + [(cert.K2 * pow_sqrt_hi(cert.C, i)).mantissa_cap(44)
                                for i in range(1, self.L + 1)]
        self.gap_dy = gap_K(cert, nu)
        self.gapq_dy = self.gap_dy.scale2(-(nu + 1))

        bm, (ox, oy) = cert.U.bitmap()
        self.bitmap = bm.astype(np.uint8)
        self.ox = ox
        self.oy = oy
        self.scale = float(2.0**cert.U.m)

        self.kernel_ok = map_spec.kind == "polynomial" and all(
            t.is_float_exact() for t in self.thresholds_dy[1:])
        if self.kernel_ok:
            nre, nim, nrad, *_ = map_spec.float_view()
            from .floatball import derivative_coeffs
            self.coef = (nre, nim, nrad)
            self.dcoef = derivative_coeffs(nre, nim, nrad)
            self.thresholds_f = np.array(
                [0.0] + [t.to_float() for t in self.thresholds_dy[1:]])
            self.k2c_f = np.array(
                [0.0] + [t.to_float("ceil") for t in self.k2c_dy[1:]])
            self.k1_down = cert.K1.to_float("floor")
            self.gapq_f = self.gapq_dy.to_float("floor")


_CTX_CACHE: dict = {}


def get_context(cert: Certificate, map_spec: MapSpec, nu: int) -> ProbeContext:
    key = (id(cert), id(map_spec), nu)
    ctx = _CTX_CACHE.get(key)
    if ctx is None or ctx.cert is not cert or ctx.map is not map_spec:
        ctx = ProbeContext(cert, map_spec, nu)
        _CTX_CACHE[key] = ctx
    return ctx


# ----------------------------------------------------------------------
# exact engine


def _exact_subprogram(ctx: ProbeContext, z: ComplexDyadic) -> Verdict:
    cert = ctx.cert
    stats: dict = {}
    qbits = ctx.qbits
    for op in orbit_iter(ctx.map, z, ctx.L, ctx.q_dy, cert.R_hat, stats=stats):
        i = op.i
        p_hat = op.p.center.round_frac(qbits, "nearest")
        if contains(cert.U, p_hat):
            continue
        d_hat = op.d.mid().round_frac(qbits, "nearest")
        bits = qbits + 64
        lo = None
        if op.d.hi.m > 0:
            lo = Dyadic.div(cert.K1, op.d.hi, bits, "floor")
        hi = None
        if op.d.lo.m > 0:
            hi = Dyadic.div(ctx.k2c_dy[i], op.d.lo, bits, "ceil")
        w = stats.get("work_bits", 0)
        if d_hat >= ctx.thresholds_dy[i]:
            hi = dmin(ctx.q_dy, hi) if hi is not None else ctx.q_dy
            return Verdict(0, "ExitStep3", i, w, lo, hi)
        lo = max(lo or Dyadic(0), ctx.gapq_dy)
        return Verdict(1, "ExitStep4", i, w, lo, hi)
    return Verdict(0, "ExitStep6", ctx.L, stats.get("work_bits", 0),
                   Dyadic(0), ctx.q_dy)


# ----------------------------------------------------------------------
# batched probes with automatic exact fallback


@dataclass
class ProbeResult:
    bit: np.ndarray
    reason: np.ndarray
    iters: np.ndarray
    dlo: np.ndarray
    dhi: np.ndarray
    err: np.ndarray
    n_exact: int = 0
    max_work_bits: int = 53


def probe_points(ctx: ProbeContext, zx: np.ndarray, zy: np.ndarray,
                 engine: str = "auto") -> ProbeResult:
    """Run the subprogram on a batch of points (must lie inside U)."""
    n = zx.shape[0]
    if engine not in ("auto", "exact", "float"):
        raise InvalidConstants(f"unknown engine {engine!r}")
    use_kernel = ctx.kernel_ok and engine in ("auto", "float")
    if use_kernel:
        status, bit, reason, iters, dlo, dhi = kernels.probe_batch(
            zx, zy, *ctx.coef, *ctx.dcoef,
            ctx.L, ctx.q_f, ctx.thresholds_f, ctx.k2c_f,
            ctx.k1_down, ctx.gapq_f,
            ctx.bitmap, ctx.ox, ctx.oy, ctx.scale)
        pending = np.nonzero(status != 0)[0]
        if engine == "float" and pending.size:
            raise PrecisionExhausted(
                f"{pending.size} points exceed float64 ball precision at "
                f"level {ctx.nu}")
    else:
        bit = np.zeros(n, dtype=np.int8)
        reason = np.zeros(n, dtype=np.int8)
        iters = np.zeros(n, dtype=np.int32)
        dlo = np.zeros(n)
        dhi = np.full(n, np.inf)
        pending = np.arange(n)
    err = np.zeros(n, dtype=bool)
    res = ProbeResult(bit, reason, iters, dlo, dhi, err, n_exact=len(pending))
    reason_ids = {v: k for k, v in REASON_NAMES.items()}
    for idx in pending:
        z = ComplexDyadic(Dyadic.from_float(float(zx[idx])),
                          Dyadic.from_float(float(zy[idx])))
        try:
            v = _exact_subprogram(ctx, z)
        except PrecisionExhausted:
            err[idx] = True
            continue
        bit[idx] = v.bit
        reason[idx] = reason_ids[v.reason]
        iters[idx] = v.iterations_used
        dlo[idx] = v.dist_lo.to_float("floor") if v.dist_lo is not None else 0.0
        dhi[idx] = v.dist_hi.to_float("ceil") if v.dist_hi is not None else np.inf
        res.max_work_bits = max(res.max_work_bits, v.max_work_bits)
    return res


# ----------------------------------------------------------------------
# public single-point operations


def subprogram(cert: Certificate, map_spec: MapSpec, n: int,
               z: ComplexDyadic, engine: str = "auto") -> Verdict:
    """Certified close/far verdict for a point of U at precision n."""
    if n < cert.n0:
        raise InvalidConstants(f"n={n} below n0={cert.n0}; coarse path applies")
    if not contains(cert.U, z):
        raise InvalidConstants("subprogram requires z in U; route far points "
                               "through decide_far_outside_U")
    ctx = get_context(cert, map_spec, n)
    if engine == "exact" or not ctx.kernel_ok:
        return _exact_subprogram(ctx, z)
    fx, fy = z.re.to_float(), z.im.to_float()
    if Dyadic.from_float(fx) != z.re or Dyadic.from_float(fy) != z.im:
        return _exact_subprogram(ctx, z)
    res = probe_points(ctx, np.array([fx]), np.array([fy]), engine)
    if res.err[0]:
        raise PrecisionExhausted("certificate inconsistency at this point")
    lo = Dyadic.from_float(float(res.dlo[0])) if res.dlo[0] > 0 else Dyadic(0)
    hi = Dyadic.from_float(float(res.dhi[0])) if np.isfinite(res.dhi[0]) else None
    return Verdict(int(res.bit[0]), REASON_NAMES[int(res.reason[0])],
                   int(res.iters[0]), res.max_work_bits, lo, hi)


def decide_far_outside_U(cert: Certificate, map_spec: MapSpec, n: int,
                         z: ComplexDyadic) -> Verdict:
    """Points outside U are at distance >= 2*eps from the set, which
    exceeds 2**-(n+1) for every n >= n0."""
    if n < cert.n0:
        raise InvalidConstants(f"n={n} below n0={cert.n0}; coarse path applies")
    if contains(cert.U, z):
        raise InvalidConstants("decide_far_outside_U requires z outside U")
    dl = dist_lower(cert.U, z)
    lo = max(cert.eps.scale2(1), dl)
    hi = dl + cert.U.diam_upper() + cert.r.scale2(1)
    return Verdict(1, "OutsideU", 0, 0, lo, hi)


def decide_point(cert: Certificate, map_spec: MapSpec, n: int,
                 z: ComplexDyadic, engine: str = "auto") -> Verdict:
    """Route to the subprogram or the outside-U shortcut."""
    if contains(cert.U, z):
        return subprogram(cert, map_spec, n, z, engine)
    return decide_far_outside_U(cert, map_spec, n, z)


def coarse_pixel_value(cert: Certificate, n: int, z: ComplexDyadic) -> int:
    """Low-resolution pixel decision from the Julia approximation alone,
    for n below n0.  Sound given the certificate's assertion that the
    approximation is within eps Hausdorff distance of the set."""
    if n >= cert.n0:
        raise InvalidConstants("coarse path is for n < n0")
    if contains(cert.julia_approx, z):
        return 1
    t = Dyadic(1, -(n + 2)) + cert.eps
    return 1 if dist_lower(cert.julia_approx, z) <= t else 0


# ----------------------------------------------------------------------
# pixel resolution (certified fill/blank bits per Eq-style contract:
# fill when d <= 2^-(n+2), blank when d >= 2^-(n+1), free in between)


@dataclass
class ResolveStats:
    """Aggregated instrumentation for a batch of pixel decisions."""

    pixels: int = 0
    outside_u: int = 0
    center_fill: int = 0
    center_blank: int = 0
    straddle: int = 0
    probes: int = 0
    exact_fallbacks: int = 0
    max_work_bits: int = 53
    levels_used: int = 0
    reason_counts: dict = field(default_factory=dict)
    iter_hist: np.ndarray = field(default_factory=lambda: np.zeros(1, dtype=np.int64))
    error_pixels: list = field(default_factory=list)

    def add_reasons(self, reason: np.ndarray, iters: np.ndarray) -> None:
        ids, cnt = np.unique(reason, return_counts=True)
        for rid, c in zip(ids, cnt):
            name = REASON_NAMES.get(int(rid), str(rid))
            self.reason_counts[name] = self.reason_counts.get(name, 0) + int(c)
        if iters.size:
            hist = np.bincount(iters)
            if hist.size > self.iter_hist.size:
                hist[:self.iter_hist.size] += self.iter_hist
                self.iter_hist = hist
            else:
                self.iter_hist[:hist.size] += hist

    def merge(self, other: "ResolveStats") -> None:
        self.pixels += other.pixels
        self.outside_u += other.outside_u
        self.center_fill += other.center_fill
        self.center_blank += other.center_blank
        self.straddle += other.straddle
        self.probes += other.probes
        self.exact_fallbacks += other.exact_fallbacks
        self.max_work_bits = max(self.max_work_bits, other.max_work_bits)
        self.levels_used = max(self.levels_used, other.levels_used)
        for k, v in other.reason_counts.items():
            self.reason_counts[k] = self.reason_counts.get(k, 0) + v
        if other.iter_hist.size > self.iter_hist.size:
            h = other.iter_hist.copy()
            h[:self.iter_hist.size] += self.iter_hist
            self.iter_hist = h
        else:
            self.iter_hist[:other.iter_hist.size] += other.iter_hist
        self.error_pixels.extend(other.error_pixels)

    @property
    def subprogram_calls(self) -> int:
        return sum(v for k, v in self.reason_counts.items()
                   if k.startswith("ExitStep"))


def resolve_pixels(cert: Certificate, map_spec: MapSpec, n: int,
                   gx: np.ndarray, gy: np.ndarray,
                   engine: str = "auto") -> tuple[np.ndarray, ResolveStats]:
    """Certified pixel bits for centers (gx, gy) / 2**(n+2).

    Fill (1) is returned only with a certificate d < 2**-(n+1); blank (0)
    only when the closed disk of radius 2**-(n+2) around the center is
    certified set-free.  The adaptive subdivision uses the distance
    brackets from each probe to excise set-free squares; its floor is the
    dense grid whose spacing resolves the verdict gap, where every square
    provably resolves.
    """
    if n < cert.n0:
        raise InvalidConstants("resolve_pixels requires n >= n0")
    stats = ResolveStats(pixels=int(gx.shape[0]))
    grid = 2.0 ** -(n + 2)
    zx = gx.astype(np.float64) * grid
    zy = gy.astype(np.float64) * grid
    bits = np.zeros(gx.shape[0], dtype=np.uint8)

    ctx_c = get_context(cert, map_spec, n + 1)
    ctx_f = get_context(cert, map_spec, n + 2)
    in_u = member_batch(zx, zy, ctx_c.bitmap, ctx_c.ox, ctx_c.oy, ctx_c.scale)
    stats.outside_u = int((~in_u).sum())
    stats.reason_counts["OutsideU"] = stats.outside_u

    thr_fill = 2.0 ** -(n + 1)
    thr_blank = 2.0 ** -(n + 2)

    idx_u = np.nonzero(in_u)[0]
    if idx_u.size == 0:
        return bits, stats
    res = probe_points(ctx_c, zx[idx_u], zy[idx_u], engine)
    stats.probes += idx_u.size
    stats.exact_fallbacks += res.n_exact
    stats.max_work_bits = max(stats.max_work_bits, res.max_work_bits)
    stats.add_reasons(res.reason[~res.err], res.iters[~res.err])
    if res.err.any():
        stats.error_pixels.extend(idx_u[res.err].tolist())
    fill = (res.dhi < thr_fill) & ~res.err
    blank = (res.dlo > thr_blank) & ~res.err
    bits[idx_u[fill]] = 1
    stats.center_fill = int(fill.sum())
    stats.center_blank = int(blank.sum())

    strad = idx_u[~fill & ~blank & ~res.err]
    stats.straddle = int(strad.size)
    if strad.size == 0:
        return bits, stats

    # adaptive subdivision of the square [z +- 2^-(n+2)]^2 per pixel
    gapq_f = ctx_f.gapq_dy.to_float("floor")
    half_floor = gapq_f * 0.5
    rho0 = thr_blank
    excl_factor = SQRT2_UP * INFL

    pix = np.arange(strad.size)
    cx = zx[strad].copy()
    cy = zy[strad].copy()
    filled = np.zeros(strad.size, dtype=bool)
    errored = np.zeros(strad.size, dtype=bool)
    half = rho0
    level = 0
    max_levels = 4 + max(1, int(math.ceil(math.log2(max(2.0, rho0 / half_floor)))))
    while pix.size:
        level += 1
        if level > max_levels:
            raise PrecisionExhausted(
                "pixel subdivision failed to terminate: certificate "
                "constants are inconsistent")
        stats.levels_used = max(stats.levels_used, level)
        keep = ~filled[pix] & ~errored[pix]
        pix, cx, cy = pix[keep], cx[keep], cy[keep]
        if pix.size == 0:
            break
        inu = member_batch(cx, cy, ctx_f.bitmap, ctx_f.ox, ctx_f.oy, ctx_f.scale)
        # squares outside U are set-free: d >= 2*eps > half*sqrt(2)
        excluded = ~inu
        if inu.any():
            sub = np.nonzero(inu)[0]
            r2 = probe_points(ctx_f, cx[sub], cy[sub], engine)
            stats.probes += sub.size
            stats.exact_fallbacks += r2.n_exact
            stats.max_work_bits = max(stats.max_work_bits, r2.max_work_bits)
            stats.add_reasons(r2.reason[~r2.err], r2.iters[~r2.err])
            if r2.err.any():
                bad = sub[r2.err]
                errored[pix[bad]] = True
                for b in pix[bad]:
                    stats.error_pixels.append(int(strad[b]))
            ddx = cx[sub] - zx[strad[pix[sub]]]
            ddy = cy[sub] - zy[strad[pix[sub]]]
            dqz = np.sqrt(ddx * ddx + ddy * ddy) * INFL
            fillc = ((r2.dhi + dqz) * INFL < thr_fill) & ~r2.err
            filled[pix[sub[fillc]]] = True
            excl2 = (r2.dlo > half * excl_factor) & ~r2.err
            full = np.zeros(pix.size, dtype=bool)
            full[sub[excl2 | fillc | r2.err]] = True
            excluded |= full
        surv = ~excluded & ~filled[pix] & ~errored[pix]
        if not surv.any():
            break
        # subdivide the survivors
        spix, scx, scy = pix[surv], cx[surv], cy[surv]
        hchild = half * 0.5
        nxt_p, nxt_x, nxt_y = [], [], []
        for dx_sign in (-1.0, 1.0):
            for dy_sign in (-1.0, 1.0):
                ccx = scx + dx_sign * hchild
                ccy = scy + dy_sign * hchild
                dxm = np.maximum(np.abs(ccx - zx[strad[spix]]) - hchild, 0.0)
                dym = np.maximum(np.abs(ccy - zy[strad[spix]]) - hchild, 0.0)
                keep_c = (dxm * dxm + dym * dym) * DEFL <= rho0 * rho0
                nxt_p.append(spix[keep_c])
                nxt_x.append(ccx[keep_c])
                nxt_y.append(ccy[keep_c])
        pix = np.concatenate(nxt_p)
        cx = np.concatenate(nxt_x)
        cy = np.concatenate(nxt_y)
        half = hchild

    bits[strad[filled]] = 1
    return bits, stats


def pixel_value(cert: Certificate, map_spec: MapSpec, n: int,
                z: ComplexDyadic, engine: str = "auto") -> int:
    """Certified pixel bit (1 = fill) for a center on the 2**-(n+2) grid."""
    if n < cert.n0:
        return coarse_pixel_value(cert, n, z)
    gbits = n + 2
    if z.re.frac_bits() > gbits or z.im.frac_bits() > gbits:
        raise InvalidConstants("pixel center must lie on the 2^-(n+2) grid")
    gx = np.array([z.re.m << (gbits + z.re.e) if z.re.e + gbits >= 0
                   else z.re.m >> -(z.re.e + gbits)], dtype=np.int64)
    gy = np.array([z.im.m << (gbits + z.im.e) if z.im.e + gbits >= 0
                   else z.im.m >> -(z.im.e + gbits)], dtype=np.int64)
    bits, stats = resolve_pixels(cert, map_spec, n, gx, gy, engine)
    if stats.error_pixels:
        raise PrecisionExhausted("pixel decision exhausted precision")
    return int(bits[0])
