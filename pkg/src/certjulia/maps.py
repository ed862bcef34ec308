"""Rational map representation and rigorous orbit evaluation.

A MapSpec holds the map as coefficient oracles (precision-indexed dyadic
approximations).  Orbits f^i(z) and derivative magnitudes |Df^i(z)| are
evaluated as balls at a requested absolute precision, with a working
precision schedule that retries with doubling when the radii come out too
wide.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import floatball
from .cover import BoxCover
from .dyadic import (
    Ball,
    CoefficientOracle,
    ComplexDyadic,
    DyInterval,
    Dyadic,
    ball_abs_bounds,
    ball_add,
    ball_mul,
    dmax,
    round_ball,
)
from .errors import DenominatorVanishes, InvalidConstants, PrecisionExhausted, RootFindingFailure

__all__ = [
    "MapSpec",
    "OrbitPoint",
    "eval_f",
    "eval_df",
    "orbit_with_derivative",
    "sup_df_on_cover",
    "preimages_complex",
    "eval_f_image_boxes",
]

# retries allowed on top of the scheduled working precision, doubling each time
MAX_PRECISION_RETRIES = 4

# slightly above sqrt(2)/2: upper bound on the half-diagonal of a unit box
HALF_DIAG_UP = 0.7071067811865477


class MapSpec:
    """Polynomial or rational map given by coefficient oracles.

    Coefficient lists are in ascending degree order.  The denominator list
    is empty for polynomials.  deg f >= 2 is required, and the whole
    artifact assumes infinity is not in the Julia set (inputs violating
    that are rejected upstream rather than conjugated away).
    """

    def __init__(self, kind: str, degree: int,
                 num: list[CoefficientOracle],
                 den: list[CoefficientOracle] | None = None):
        if kind not in ("polynomial", "rational"):
            raise InvalidConstants(f"bad map kind {kind!r}")
        den = den or []
        if kind == "polynomial" and den:
            raise InvalidConstants("polynomial map cannot have a denominator")
        if kind == "rational" and not den:
            raise InvalidConstants("rational map needs denominator coefficients")
        if degree < 2:
            raise InvalidConstants("map degree must be >= 2")
        if len(num) != degree + 1 and kind == "polynomial":
            raise InvalidConstants("numerator length must be degree + 1")
        self.kind = kind
        self.degree = degree
        self.num = num
        self.den = den
        self._float_view = None

    # -- constructors ----------------------------------------------------

    @staticmethod
    def polynomial_from_strings(coeffs: list[str]) -> "MapSpec":
        oracles = [CoefficientOracle.from_string(c, label=f"a{k}")
                   for k, c in enumerate(coeffs)]
        return MapSpec("polynomial", len(coeffs) - 1, oracles)

    @staticmethod
    def quadratic(c: ComplexDyadic) -> "MapSpec":
        """z^2 + c."""
        mk = lambda v, lbl: CoefficientOracle(exact=v, label=lbl)
        return MapSpec("polynomial", 2, [
            mk(c, "a0"),
            mk(ComplexDyadic.from_ints(0), "a1"),
            mk(ComplexDyadic.from_ints(1), "a2"),
        ])

    # -- serialization -----------------------------------------------------

    def to_json(self) -> dict:
        def enc(oracles):
            out = []
            for o in oracles:
                v = o.exact_value()
                if v is not None:
                    out.append({"re": v.re.to_pow2_string(), "im": v.im.to_pow2_string()})
                else:
                    p_re, p_im, q = o._num
                    out.append({"rational": [str(p_re), str(p_im), str(q)]})
            return out
        return {"kind": self.kind, "degree": self.degree,
                "numerator": enc(self.num), "denominator": enc(self.den)}

    @staticmethod
    def from_json(data: dict) -> "MapSpec":
        def dec(items, prefix):
            out = []
            for k, item in enumerate(items):
                if "rational" in item:
                    p_re, p_im, q = (int(x) for x in item["rational"])
                    out.append(CoefficientOracle(rational=(p_re, p_im, q),
                                                 label=f"{prefix}{k}"))
                else:
                    v = ComplexDyadic(Dyadic.parse(item["re"]), Dyadic.parse(item["im"]))
                    out.append(CoefficientOracle(exact=v, label=f"{prefix}{k}"))
            return out
        return MapSpec(data["kind"], data["degree"],
                       dec(data["numerator"], "a"), dec(data["denominator"], "b"))

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_json(), f, indent=1)

    @staticmethod
    def load(path) -> "MapSpec":
        with open(path) as f:
            return MapSpec.from_json(json.load(f))

    # -- float view for the fast kernels -----------------------------------

    def float_view(self):
        """(num_re, num_im, num_rad, den_re, den_im, den_rad) float64 arrays.

        Radii cover both the oracle error and the dyadic-to-float
        conversion, so the float arrays are genuine coefficient balls.
        """
        if self._float_view is None:
            def conv(oracles):
                re, im, rad = [], [], []
                for o in oracles:
                    v = o.query(80)
                    fr, fi = v.re.to_float(), v.im.to_float()
                    err = (abs(v.re - Dyadic.from_float(fr)) +
                           abs(v.im - Dyadic.from_float(fi)) +
                           Dyadic(1, -79)).to_float("ceil")
                    if o.exact_value() is not None and v.re.is_float_exact() \
                            and v.im.is_float_exact():
                        err = 0.0
                    re.append(fr)
                    im.append(fi)
                    rad.append(err)
                return (np.array(re), np.array(im), np.array(rad))
            self._float_view = conv(self.num) + conv(self.den)
        return self._float_view

    def __repr__(self) -> str:
        return f"MapSpec({self.kind}, degree={self.degree})"


@dataclass
class OrbitPoint:
    """One orbit step: ball around f^i(z) and interval around |Df^i(z)|."""

    i: int
    p: Ball
    d: DyInterval


def _coeff_ball(oracle: CoefficientOracle, work_bits: int) -> Ball:
    v = oracle.query(work_bits + 2)
    if oracle.exact_value() is not None:
        return Ball.point(v)
    return Ball(v, Dyadic(1, -(work_bits + 2)))


def _horner(coeffs: list[CoefficientOracle], z: Ball, work_bits: int) -> Ball:
    b = _coeff_ball(coeffs[-1], work_bits)
    for k in range(len(coeffs) - 2, -1, -1):
        b = ball_mul(b, z, work_bits)
        b = ball_add(b, _coeff_ball(coeffs[k], work_bits), work_bits)
    return b


def _ball_div(a: Ball, b: Ball, work_bits: int) -> Ball:
    """Quotient ball; requires the denominator ball to exclude zero."""
    blo, bhi = ball_abs_bounds(b, work_bits)
    if blo.m <= 0:
        raise DenominatorVanishes("denominator ball contains zero")
    # center: a.center * conj(b.center) / |b.center|^2, directed per coord
    cb = b.center
    conj = ComplexDyadic(cb.re, -cb.im)
    numc = a.center * conj
    den = cb.abs2()
    qre = Dyadic.div(numc.re, den, work_bits, "nearest")
    qim = Dyadic.div(numc.im, den, work_bits, "nearest")
    q = ComplexDyadic(qre, qim)
    qabs = q.abs_upper()
    # |x/y - q| <= (ra + |q'| rb)/blo + |q' - q|, with q' the exact quotient
    cdrift = Dyadic(1, -work_bits + 1)
    rad = Dyadic.div(a.radius + (qabs + cdrift) * b.radius, blo, work_bits, "ceil")
    rad = rad + cdrift
    return Ball(q, rad.mantissa_cap())


def _der_oracles(coeffs: list[CoefficientOracle]) -> list[CoefficientOracle]:
    out = []
    for k, o in enumerate(coeffs[1:], start=1):
        v = o.exact_value()
        if v is not None:
            kk = ComplexDyadic.from_ints(k)
            out.append(CoefficientOracle(exact=kk * v, label=f"d{k}"))
        else:
            p_re, p_im, q = o._num
            out.append(CoefficientOracle(rational=(k * p_re, k * p_im, q), label=f"d{k}"))
    return out


def eval_f(map_spec: MapSpec, z: Ball, work_bits: int) -> Ball:
    """Ball containing f(x) for every x in z."""
    if work_bits < 1:
        raise InvalidConstants("work_bits must be >= 1")
    n = _horner(map_spec.num, z, work_bits)
    if map_spec.kind == "polynomial":
        return n
    d = _horner(map_spec.den, z, work_bits)
    return _ball_div(n, d, work_bits)


def eval_df(map_spec: MapSpec, z: Ball, work_bits: int) -> Ball:
    """Ball containing f'(x) for every x in z."""
    if not hasattr(map_spec, "_dnum"):
        map_spec._dnum = _der_oracles(map_spec.num)
        map_spec._dden = _der_oracles(map_spec.den) if map_spec.den else None
    dn = _horner(map_spec._dnum, z, work_bits)
    if map_spec.kind == "polynomial":
        return dn
    n = _horner(map_spec.num, z, work_bits)
    d = _horner(map_spec.den, z, work_bits)
    dd = _horner(map_spec._dden, z, work_bits)
    # (N'D - ND') / D^2
    top = ball_add(ball_mul(dn, d, work_bits),
                   ball_mul(Ball(-n.center, n.radius), dd, work_bits), work_bits)
    return _ball_div(top, ball_mul(d, d, work_bits), work_bits)


def _schedule_bits(target: Dyadic, i_max: int, r_hat: Dyadic) -> int:
    """Working precision: error growth per iterate is bounded by the
    derivative sup, so O(target bits + i_max * log2(R+2)) suffices."""
    tb = max(1, -target.floor_log2()) if target < Dyadic(1) else 1
    growth = (r_hat + Dyadic(2)).ceil_log2()
    return tb + i_max * max(1, growth) + 16


def orbit_iter(map_spec: MapSpec, z: ComplexDyadic, i_max: int,
               target: Dyadic, r_hat: Dyadic,
               escape_bound: Dyadic | None = None,
               stats: dict | None = None):
    """Generator over OrbitPoints; p radii stay <= target/4 and d widths
    <= target/2 or PrecisionExhausted is raised after the retry cap.

    The caller may stop consuming at any time; if an iterate escapes the
    given bound the generator stops early (prefix semantics).
    """
    if target.m <= 0:
        raise InvalidConstants("target precision must be positive")
    p_rad_cap = target.scale2(-2)
    d_width_cap = target.scale2(-1)
    w0 = _schedule_bits(target, i_max, r_hat)
    attempt = 0
    yielded = 0
    while True:
        w = w0 << attempt
        if stats is not None:
            stats["work_bits"] = w
        pball = Ball.point(z)
        dint = DyInterval(Dyadic(1), Dyadic(1))
        retry = False
        for i in range(1, i_max + 1):
            dfb = eval_df(map_spec, pball, w)
            lo, hi = ball_abs_bounds(dfb, w)
            dint = dint.mul_nonneg(DyInterval(lo, hi)).round_out(w)
            pball = eval_f(map_spec, pball, w)
            if pball.radius > p_rad_cap or dint.width() > d_width_cap:
                retry = True
                break
            # lazy: yield as soon as a step is certified; on a retry the
            # earlier (already valid) steps are recomputed silently, so an
            # abandoned generator never pays for iterates past the point
            # where the consumer stopped
            if i > yielded:
                yield OrbitPoint(i, pball, dint)
                yielded = i
                if escape_bound is not None:
                    plo, _ = ball_abs_bounds(pball, 32)
                    if plo > escape_bound:
                        return
        if not retry:
            return
        attempt += 1
        if attempt > MAX_PRECISION_RETRIES:
            raise PrecisionExhausted(
                f"orbit at z={z} needs more than {w} working bits for "
                f"target {target}; certificate data is likely inconsistent")


def orbit_with_derivative(map_spec: MapSpec, z: ComplexDyadic, i_max: int,
                          target: Dyadic, r_hat: Dyadic,
                          escape_bound: Dyadic | None = None) -> list[OrbitPoint]:
    """Orbit prefix with derivative magnitudes, as a list.

    Escaping orbits blow up doubly-exponentially and cannot meet an
    absolute precision target, so by default the list stops once an
    iterate provably exceeds 2**12 in modulus (prefix semantics).
    """
    if escape_bound is None:
        escape_bound = Dyadic(1, 12)
    return list(orbit_iter(map_spec, z, i_max, target, r_hat, escape_bound))


def sup_df_on_cover(map_spec: MapSpec, cover: BoxCover, inflate_by: Dyadic,
                    split: int = 2, work_bits: int = 64) -> Dyadic:
    """Dyadic upper bound on sup |f'| over the cover inflated by the given
    amount, by interval evaluation over (sub-divided) boxes."""
    if inflate_by.m < 0:
        raise InvalidConstants("inflate_by must be >= 0")
    m = cover.m
    sub = 1 << split
    step = Dyadic(1, -m - split)
    half = step.scale2(-1)
    half_diag = Dyadic.sqrt(half * half + half * half, m + split + 8, "ceil")
    rad = half_diag + inflate_by

    nre, nim, nrad, *_ = map_spec.float_view()
    if map_spec.kind == "polynomial":
        dre, dim, drad = floatball.derivative_coeffs(nre, nim, nrad)
        centers = []
        for dx in range(sub):
            for dy in range(sub):
                cx = (cover.boxes[:, 0].astype(np.float64) * sub + dx + 0.5) * step.to_float()
                cy = (cover.boxes[:, 1].astype(np.float64) * sub + dy + 0.5) * step.to_float()
                centers.append((cx, cy))
        best = 0.0
        rf = rad.to_float("ceil")
        for cx, cy in centers:
            vre, vim, vrad = floatball.poly_eval_ball(dre, dim, drad, cx, cy, rf)
            _, hi = floatball.ball_abs_bounds(vre, vim, vrad)
            best = max(best, float(np.max(hi)))
        return Dyadic.from_float(best * (1.0 + 2.0**-40)).mantissa_cap(40)

    # rational: exact ball loop (pole detection included)
    best_d = Dyadic(0)
    for ix, iy in cover.boxes:
        cx = Dyadic(2 * int(ix) + 1, -m - 1)
        cy = Dyadic(2 * int(iy) + 1, -m - 1)
        b = Ball(ComplexDyadic(cx, cy),
                 (Dyadic.sqrt(Dyadic(2), 20, "ceil").scale2(-m - 1) + inflate_by).mantissa_cap())
        dfb = eval_df(map_spec, b, work_bits)
        _, hi = ball_abs_bounds(dfb, work_bits)
        best_d = dmax(best_d, hi)
    return best_d.mantissa_cap(40)


def preimages_complex(map_spec: MapSpec, targets: np.ndarray) -> np.ndarray:
    """All complex preimages f^{-1}(t) for each target (uncertified float
    computation used for scaffolding clouds)."""
    nre, nim, _, dre_, dim_, _ = map_spec.float_view()
    ncoef = nre + 1j * nim
    if map_spec.kind == "polynomial" and map_spec.degree == 2:
        a0, a1, a2 = ncoef[0], ncoef[1], ncoef[2]
        disc = np.sqrt(a1 * a1 - 4.0 * a2 * (a0 - targets))
        w1 = (-a1 + disc) / (2.0 * a2)
        w2 = (-a1 - disc) / (2.0 * a2)
        roots = np.concatenate([w1, w2])
        check_targets = np.concatenate([targets, targets])
    else:
        dcoef = (dre_ + 1j * dim_) if len(dre_) else None
        roots_list = []
        t_list = []
        for t in targets:
            if map_spec.kind == "polynomial":
                poly = ncoef.copy()
                poly[0] -= t
            else:
                poly = np.zeros(max(len(ncoef), len(dcoef)), dtype=np.complex128)
                poly[:len(ncoef)] += ncoef
                poly[:len(dcoef)] -= t * dcoef
            rr = np.roots(poly[::-1])
            roots_list.append(rr)
            t_list.append(np.full(rr.shape, t))
        roots = np.concatenate(roots_list)
        check_targets = np.concatenate(t_list)
    # residual check
    vals = np.polyval(ncoef[::-1], roots)
    if map_spec.kind == "rational":
        dcoef = dre_ + 1j * dim_
        vals = vals / np.polyval(dcoef[::-1], roots)
    resid = np.abs(vals - check_targets)
    tol = 1e-7 * np.maximum(1.0, np.abs(check_targets))
    if np.any(resid > tol):
        raise RootFindingFailure(
            f"preimage residual {float(resid.max()):.3g} exceeds tolerance")
    return roots


def eval_f_image_boxes(map_spec: MapSpec, src: BoxCover, target: BoxCover) -> list:
    """Indices of src boxes whose interval image under f is not contained
    in the target cover (conservative: image balls are over-approximated
    by index rectangles expanded one box outward)."""
    nre, nim, nrad, *_ = map_spec.float_view()
    if map_spec.kind != "polynomial":
        raise InvalidConstants("image check currently supports polynomial maps")
    centers = src.box_centers()
    rad = 2.0**-src.m * HALF_DIAG_UP
    ire, iim, irad = floatball.poly_eval_ball(nre, nim, nrad,
                                              centers[:, 0], centers[:, 1], rad)
    irad = irad * (1.0 + 2.0**-40) + 2.0**-40 * (np.abs(ire) + np.abs(iim) + 1.0)
    mt = target.m
    bm, (ox, oy) = target.bitmap()
    ix_lo = np.floor((ire - irad) * 2.0**mt).astype(np.int64) - 1
    ix_hi = np.floor((ire + irad) * 2.0**mt).astype(np.int64) + 1
    iy_lo = np.floor((iim - irad) * 2.0**mt).astype(np.int64) - 1
    iy_hi = np.floor((iim + irad) * 2.0**mt).astype(np.int64) + 1
    span_x = int(np.max(ix_hi - ix_lo)) + 1
    span_y = int(np.max(iy_hi - iy_lo)) + 1
    ok = np.ones(centers.shape[0], dtype=bool)
    H, W = bm.shape
    for a in range(span_x):
        ix = np.minimum(ix_lo + a, ix_hi) - ox
        in_x = (ix >= 0) & (ix < H)
        for b in range(span_y):
            iy = np.minimum(iy_lo + b, iy_hi) - oy
            in_y = (iy >= 0) & (iy < W)
            good = in_x & in_y
            hit = np.zeros_like(ok)
            hit[good] = bm[ix[good], iy[good]]
            ok &= hit
    bad = np.nonzero(~ok)[0]
    return [tuple(src.boxes[i]) for i in bad]
