"""Non-uniform certificate constants and their derivation helpers.

A Certificate carries the constants the certified decision procedure
needs: the component-shrinking rate lambda and radius r, the critical
recurrence bound mu, the neighborhood constant eps with its box cover U,
the two-sided distortion constants K1, K2, C, the pullback-diameter
constants alpha and beta, and a derivative sup bound R_hat.  Every
runtime-used constant carries a provenance tag (rigorous, heuristic, or
user-asserted).

All transcendental-looking quantities here (fractional powers, log
ratios) are evaluated with directed rounding built from exact integer
arithmetic, in the sound direction for each use site.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import floatball
from .cover import BoxCover, ValidationReport, inflate, validate_Ucond
from .dyadic import ComplexDyadic, Dyadic, dmax
from .errors import InsufficientSamples, InvalidConstants
from .maps import MapSpec

__all__ = [
    "Certificate",
    "L_of",
    "threshold",
    "gap_K",
    "derive_alpha_beta",
    "derive_K1",
    "estimate_K2_C",
    "validate",
]


# ----------------------------------------------------------------------
# directed dyadic powers


def dy_pow_int(x: Dyadic, k: int) -> Dyadic:
    """Exact integer power (k >= 0)."""
    if k < 0:
        raise InvalidConstants("negative exponent")
    return Dyadic(x.m**k, x.e * k)


@lru_cache(maxsize=4096)
def _sqrt_chain_hi(x: Dyadic, depth: int, bits: int = 64) -> Dyadic:
    """Upper bound on x**(2**-depth) via iterated directed square roots."""
    v = x
    for _ in range(depth):
        v = Dyadic.sqrt(v, bits, "ceil")
    return v


@lru_cache(maxsize=4096)
def _sqrt_chain_lo(x: Dyadic, depth: int, bits: int = 64) -> Dyadic:
    v = x
    for _ in range(depth):
        v = Dyadic.sqrt(v, bits, "floor")
    return v


def _cap_dir(v: Dyadic, bits: int, mode: str) -> Dyadic:
    """Directed mantissa cap for positive values."""
    if v.m.bit_length() <= bits:
        return v
    if mode == "ceil":
        return v.mantissa_cap(bits)
    s = v.m.bit_length() - bits
    return Dyadic(v.m >> s, v.e + s)


def pow_frac_dir(x: Dyadic, t: int, k: int, mode: str) -> Dyadic:
    """Directed bound on x**(t / 2**k) for x > 0, t >= 0.

    mode "ceil" gives an upper bound, "floor" a lower bound.
    """
    if x.m <= 0:
        raise InvalidConstants("base must be positive")
    ipart = t >> k
    frac = t & ((1 << k) - 1)
    out = dy_pow_int(x, ipart)
    chain = _sqrt_chain_hi if mode == "ceil" else _sqrt_chain_lo
    for j in range(1, k + 1):
        if frac & (1 << (k - j)):
            out = _cap_dir(out * chain(x, j), 60, mode)
    return out


@lru_cache(maxsize=4096)
def pow_sqrt_hi(c: Dyadic, i: int, frac_bits: int = 32) -> Dyadic:
    """Upper bound on c**sqrt(i) for c >= 1, i >= 1; exact when i is a
    perfect square."""
    if c < Dyadic(1):
        raise InvalidConstants("base must be >= 1")
    s = math.isqrt(i)
    if s * s == i:
        return dy_pow_int(c, s)
    # sqrt(i) <= (isqrt(i * 4^fb) + 1) / 2^fb
    t = math.isqrt(i << (2 * frac_bits)) + 1
    return pow_frac_dir(c, t, frac_bits, "ceil")


# ----------------------------------------------------------------------
# certificate record


_CONSTANT_FIELDS = ("lam", "r", "mu", "eps", "K1", "K2", "C",
                    "alpha", "beta", "R_hat")


@dataclass
class Certificate:
    """Non-uniform constants plus the neighborhood covers.

    Immutable after load/derivation; queries are pure and the whole record
    is safe to share across threads.
    """

    lam: Dyadic
    r: Dyadic
    mu: Dyadic
    eps: Dyadic
    U: BoxCover
    K1: Dyadic
    K2: Dyadic
    C: Dyadic
    alpha: Dyadic
    beta: Dyadic
    R_hat: Dyadic
    julia_approx: BoxCover
    provenance: dict = field(default_factory=dict)
    notes: dict = field(default_factory=dict)
    ce_C: Dyadic | None = None
    ce_gamma: Dyadic | None = None

    @property
    def n0(self) -> int:
        """Smallest n with 2**-n <= eps: below it the coarse path applies."""
        return max(0, -self.eps.floor_log2())

    # -- serialization --------------------------------------------------

    def to_json(self, cover_paths: dict | None = None) -> dict:
        consts = {}
        for name in _CONSTANT_FIELDS:
            consts[name] = {
                "value": getattr(self, name).to_pow2_string(),
                "provenance": self.provenance.get(name, "user-asserted"),
                "note": self.notes.get(name, ""),
            }
        for name in ("ce_C", "ce_gamma"):
            v = getattr(self, name)
            if v is not None:
                consts[name] = {"value": v.to_pow2_string(),
                                "provenance": "metadata", "note": ""}
        out = {"format": "certjulia-certificate 1", "constants": consts}
        for key, cov in (("U", self.U), ("julia_approx", self.julia_approx)):
            if cover_paths and key in cover_paths:
                out[key] = {"path": str(cover_paths[key])}
            else:
                out[key] = {"inline": cov.to_text()}
        return out

    @staticmethod
    def from_json(data: dict, base_dir: Path | None = None) -> "Certificate":
        consts = data["constants"]
        kw = {}
        prov = {}
        notes = {}
        for name in _CONSTANT_FIELDS:
            kw[name] = Dyadic.parse(consts[name]["value"])
            prov[name] = consts[name].get("provenance", "user-asserted")
            notes[name] = consts[name].get("note", "")
        covers = {}
        for key in ("U", "julia_approx"):
            spec = data[key]
            if "inline" in spec:
                covers[key] = BoxCover.from_text(spec["inline"])
            else:
                p = Path(spec["path"])
                if base_dir is not None and not p.is_absolute():
                    p = base_dir / p
                covers[key] = BoxCover.load(p)
        extra = {}
        for name in ("ce_C", "ce_gamma"):
            if name in consts:
                extra[name] = Dyadic.parse(consts[name]["value"])
        return Certificate(U=covers["U"], julia_approx=covers["julia_approx"],
                           provenance=prov, notes=notes, **kw, **extra)

    def save(self, path, cover_paths: dict | None = None) -> None:
        with open(path, "w") as f:
            json.dump(self.to_json(cover_paths), f, indent=1)

    @staticmethod
    def load(path) -> "Certificate":
        p = Path(path)
        with open(p) as f:
            return Certificate.from_json(json.load(f), base_dir=p.parent)

    def replaced(self, **changes) -> "Certificate":
        """Copy with some constants replaced (used by fault-injection tests)."""
        kw = {name: getattr(self, name) for name in _CONSTANT_FIELDS}
        kw.update(U=self.U, julia_approx=self.julia_approx,
                  provenance=dict(self.provenance), notes=dict(self.notes),
                  ce_C=self.ce_C, ce_gamma=self.ce_gamma)
        kw.update(changes)
        return Certificate(**kw)


# ----------------------------------------------------------------------
# derived quantities


@lru_cache(maxsize=65536)
def _L_cached(lam: Dyadic, n: int) -> int:
    # smallest c with lam^c <= 2^-(n+1), then one more: the extra step
    # makes lam^L < 2^-(n+1) strict, which the exit-at-loop-end case needs
    lf = lam.to_float()
    c = max(1, int(math.ceil((n + 1) * math.log(2) / -math.log(lf))) - 2)
    target = Dyadic(1, -(n + 1))
    while dy_pow_int(lam, c) > target:
        c += 1
    while c > 1 and dy_pow_int(lam, c - 1) <= target:
        c -= 1
    return c + 1


def L_of(cert: Certificate, n: int) -> int:
    """Iteration budget L(n): guarantees lam**L < 2**-(n+1)."""
    if n < 0:
        raise InvalidConstants("n must be >= 0")
    if not (Dyadic(0) < cert.lam < Dyadic(1)):
        raise InvalidConstants("lambda must lie in (0, 1)")
    return _L_cached(cert.lam, n)


def threshold(cert: Certificate, i: int, n: int) -> Dyadic:
    """Dyadic upper bound on K2 * C**sqrt(i) * 2**(n+1) + 1.

    The same rounded value is used on both sides of the derivative
    comparison; the rounding slack is kept below 1/2 so the standard
    +1/+2 slack argument absorbs it together with the approximant error.
    """
    if i < 1:
        raise InvalidConstants("threshold index must be >= 1")
    prod = (cert.K2 * pow_sqrt_hi(cert.C, i)).mantissa_cap(44)
    return prod.scale2(n + 1) + Dyadic(1)


@lru_cache(maxsize=65536)
def _gap_cached(K1: Dyadic, K2: Dyadic, C: Dyadic, L: int) -> Dyadic:
    den = K2 * pow_sqrt_hi(C, L) + Dyadic(1)
    bits = max(16, -K1.floor_log2() + den.ceil_log2() + 48)
    g = Dyadic.div(K1, den, bits, "floor")
    if g.m <= 0:
        raise InvalidConstants("gap constant underflowed")
    return g


def gap_K(cert: Certificate, n: int) -> Dyadic:
    """Dyadic lower bound on K1 / (K2 * C**sqrt(L(n)) + 1), in (0, 1]."""
    return _gap_cached(cert.K1, cert.K2, cert.C, L_of(cert, n))


def derive_K1(eps: Dyadic) -> Dyadic:
    """K1 = eps / 4, exact (quarter-disk image bound of univalent inverse
    branches on the postcritically-free disk)."""
    if eps.m <= 0:
        raise InvalidConstants("eps must be positive")
    return eps.scale2(-2)


def _log_ratio_floor(base: Dyadic, arg_inv: Dyadic, k: int) -> int:
    """Largest t with base**(t/2**k) <= 1/arg_inv, i.e. a rounded-down
    t/2**k approximation of log_base(1/arg_inv).

    base > 1 and 0 < arg_inv < 1 required (so the ratio is positive).
    Exact integer comparisons: base^t * arg_inv^(2^k) <= 1.
    """
    bf = base.to_float()
    af = arg_inv.to_float()
    t = max(0, int((2**k) * (-math.log(af)) / math.log(bf)) - 2)
    big = dy_pow_int(arg_inv, 1 << k)

    def ok(tt: int) -> bool:
        v = dy_pow_int(base, tt) * big
        return v <= Dyadic(1)

    while ok(t + 1):
        t += 1
    while t > 0 and not ok(t):
        t -= 1
    return t


def derive_alpha_beta(lam: Dyadic, r: Dyadic, R_hat: Dyadic,
                      k: int = 12) -> tuple[Dyadic, Dyadic]:
    """Constants for the pullback-diameter bound diam(W) <= alpha *
    delta**beta * lam**n.

    beta = log(1/lam) / log(R_hat) rounded down; alpha = 1/(lam * r**beta)
    rounded up.  Rounding beta down weakens (delta/r)**beta for delta < r,
    and alpha's division is directed up, so the pair stays sound.
    """
    if R_hat <= Dyadic(1):
        raise InvalidConstants("R_hat must exceed 1")
    if not (Dyadic(0) < lam < Dyadic(1)) or r.m <= 0:
        raise InvalidConstants("need 0 < lambda < 1 and r > 0")
    kk = k
    t = _log_ratio_floor(R_hat, lam, kk)
    while t == 0 and kk < 24:
        kk += 4
        t = _log_ratio_floor(R_hat, lam, kk)
    if t == 0:
        raise InvalidConstants("beta underflowed: R_hat too large for lambda")
    beta = Dyadic(t, -kk)
    r_pow_lo = pow_frac_dir(r, t, kk, "floor")
    den = lam * r_pow_lo
    bits = max(32, -den.floor_log2() + 48)
    alpha = Dyadic.div(Dyadic(1), den, bits, "ceil")
    return alpha, beta


# ----------------------------------------------------------------------
# heuristic estimation of K2, C


def estimate_K2_C(map_spec: MapSpec, cert: Certificate, sample_budget: int,
                  cloud: np.ndarray | None = None,
                  seed: int = 20260810) -> tuple[Dyadic, Dyadic, str]:
    """Fit (K2, C) so dist(z) * |Df^k(z)| <= K2 * C**sqrt(k) over sampled
    points that exit U at time k, inflated by a safety factor 2.

    Heuristic: the distances used are the construction offsets from the
    Julia cloud, not certified distances.  Tagged "heuristic".
    """
    rng = np.random.default_rng(seed)
    if cloud is None:
        cloud = cert.julia_approx.box_centers()
        cloud = cloud[:, 0] + 1j * cloud[:, 1]
    nre, nim, _, *_ = map_spec.float_view()
    if map_spec.kind != "polynomial":
        raise InvalidConstants("estimation currently supports polynomial maps")
    coef = nre + 1j * nim
    dcoef = np.polyder(coef[::-1])[::-1]

    bm, (ox, oy) = cert.U.bitmap()
    H, W = bm.shape
    scale = 2.0**cert.U.m

    def in_u(z):
        ix = np.floor(z.real * scale).astype(np.int64) - ox
        iy = np.floor(z.imag * scale).astype(np.int64) - oy
        good = (ix >= 0) & (ix < H) & (iy >= 0) & (iy < W)
        out = np.zeros(z.shape, dtype=bool)
        out[good] = bm[ix[good], iy[good]]
        return out

    m = cert.U.m
    ks, vals = [], []
    n_samp = max(0, sample_budget)
    if n_samp:
        from scipy.spatial import cKDTree

        base = cloud[rng.integers(0, len(cloud), n_samp)]
        js = rng.integers(3, m + 1, n_samp)
        ang = rng.uniform(0, 2 * np.pi, n_samp)
        zs = base + (2.0 ** -js.astype(float)) * np.exp(1j * ang)
        # the offset direction is arbitrary, so the requested 2^-j is not
        # the distance; measure against the cloud and drop samples below
        # its accuracy, where the measurement would be junk
        tree = cKDTree(np.stack([cloud.real, cloud.imag], axis=1))
        dist0, _ = tree.query(np.stack([zs.real, zs.imag], axis=1))
        alive = in_u(zs) & (dist0 > 4.0 * 2.0**-m)
        z = zs.copy()
        dz = np.ones_like(zs)
        i_cap = 8 * (m + 4)
        for k in range(1, i_cap + 1):
            if not alive.any():
                break
            dz[alive] = dz[alive] * np.polyval(dcoef[::-1], z[alive])
            z[alive] = np.polyval(coef[::-1], z[alive])
            inside = in_u(z)
            exited = alive & ~inside
            for idx in np.nonzero(exited)[0]:
                v = dist0[idx] * abs(dz[idx])
                if v > 0 and np.isfinite(v):
                    ks.append(k)
                    vals.append(v)
            alive &= inside
    if len(vals) < 10:
        raise InsufficientSamples(
            f"only {len(vals)} exits observed; raise the sample budget")
    ks_arr = np.array(ks)
    vals_arr = np.array(vals)
    # fit the upper envelope: per-exit-time maxima carry the growth law,
    # the scatter below them is just overshoot noise
    uniq = np.unique(ks_arr)
    env_v = np.array([vals_arr[ks_arr == k].max() for k in uniq])
    if len(uniq) >= 2:
        slope, _ = np.polyfit(np.sqrt(uniq.astype(float)), np.log(env_v), 1)
    else:
        slope = 0.0
    c_fit = max(1.0, math.exp(slope))
    sk = np.sqrt(ks_arr.astype(float))
    k2_fit = float(np.max(vals_arr / c_fit**sk))
    K2 = Dyadic.from_float(k2_fit * 2.0).mantissa_cap(24)
    C = dmax(Dyadic.from_float(c_fit * 1.02).mantissa_cap(24),
             Dyadic(1) + Dyadic(1, -10))
    return K2, C, "heuristic"


# ----------------------------------------------------------------------
# validation


def _critical_point_exclusion(map_spec: MapSpec, cert: Certificate,
                              report: ValidationReport) -> None:
    """Interval exclusion of roots of f' from the 2r-band around the Julia
    approximation (minus the approximation itself)."""
    if map_spec.kind != "polynomial":
        report.add("critical-exclusion", False, "rational maps not supported yet")
        return
    ja = cert.julia_approx
    band = inflate(ja, cert.r.scale2(1).round_frac(ja.m, "ceil"))
    ja_keys = set(map(tuple, ja.boxes))
    ring = np.array([b for b in band.boxes if tuple(b) not in ja_keys])
    if ring.size == 0:
        report.add("critical-exclusion", True, "band is empty")
        return
    nre, nim, nrad, *_ = map_spec.float_view()
    dre, dim, drad = floatball.derivative_coeffs(nre, nim, nrad)
    todo = ring.astype(np.float64)
    half = 0.5 * 2.0**-ja.m
    rad = 2.0**-ja.m * 0.7071067811865477
    bad: list[tuple] = []
    for depth in range(4):
        if todo.size == 0:
            break
        cx = (todo[:, 0] + 0.5) * 2.0**-ja.m if depth == 0 else todo[:, 0]
        cy = (todo[:, 1] + 0.5) * 2.0**-ja.m if depth == 0 else todo[:, 1]
        vre, vim, vrad = floatball.poly_eval_ball(dre, dim, drad, cx, cy, rad)
        lo, _ = floatball.ball_abs_bounds(vre, vim, vrad)
        sus = lo <= 0.0
        if depth == 0:
            todo = np.stack([cx[sus], cy[sus]], axis=1)
        else:
            todo = todo[sus]
        if todo.size == 0:
            break
        if depth == 3:
            bad = [(float(x), float(y)) for x, y in todo[:20]]
            break
        children = []
        h = half / (1 << depth)
        for dx in (-h / 2, h / 2):
            for dy in (-h / 2, h / 2):
                children.append(todo + np.array([dx, dy]))
        todo = np.concatenate(children, axis=0)
        rad = (h / 2) * 1.4142135623730952
    report.add("critical-exclusion", not bad,
               f"possible critical points near {bad[:5]}" if bad else "")


def validate(cert: Certificate, map_spec: MapSpec) -> ValidationReport:
    """Range checks, neighborhood-condition checks, critical point
    exclusion, and K1 consistency.  Soundness of a pass is relative to the
    accuracy of the Julia approximation cover."""
    rep = ValidationReport()
    one = Dyadic(1)
    rep.add("lambda range", Dyadic(0) < cert.lam < one, f"lambda={cert.lam}")
    rep.add("mu range", Dyadic(0) < cert.mu < one, f"mu={cert.mu}")
    rep.add("eps < r", Dyadic(0) < cert.eps < cert.r,
            f"eps={cert.eps} r={cert.r}")
    rep.add("K1 positive", cert.K1.m > 0, f"K1={cert.K1}")
    rep.add("K1 <= K2", cert.K1 <= cert.K2, f"K1={cert.K1} K2={cert.K2}")
    rep.add("C >= 1", cert.C >= one, f"C={cert.C}")
    rep.add("alpha > 0", cert.alpha.m > 0, "")
    rep.add("beta > 0", cert.beta.m > 0, "")
    rep.add("R_hat > 1", cert.R_hat > one, f"R_hat={cert.R_hat}")
    rep.add("cover resolution <= eps/4",
            Dyadic(1, -cert.U.m) <= cert.eps.scale2(-2),
            f"2^-{cert.U.m} vs eps/4={cert.eps.scale2(-2)}")
    if not rep.overall:
        return rep
    sub = validate_Ucond(map_spec, cert.U, cert.julia_approx, cert.eps, cert.r)
    for name, ok, wit in sub.checks:
        rep.add(f"Ucond/{name}", ok, wit)
    rep.notes = sub.notes
    _critical_point_exclusion(map_spec, cert, rep)
    if cert.provenance.get("K1") == "rigorous":
        rep.add("K1 == eps/4", cert.K1 == derive_K1(cert.eps),
                f"K1={cert.K1} eps/4={cert.eps.scale2(-2)}")
    return rep
