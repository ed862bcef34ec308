"""Ground-truth machinery: exact distance oracles and the conformance
harness checking the verdict and pixel contracts against them.

Only the square map (unit circle) and the shifted square map (segment
[-2, 2]) have closed-form distance functions; other maps are tested by
property instead.  The harness classifies every sample exactly with the
oracle bracket, runs the routed verdict, and flags the two contract
violations: answering "far" for a point certified close, or "close" for
a point certified far.  The middle band permits both answers and is
recorded, never flagged.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .certificate import Certificate, gap_K
from .cover import contains
from .decider import get_context, probe_points
from .dyadic import ComplexDyadic, Dyadic, dmax
from .errors import RootFindingFailure
from .kernels_numpy import member_batch
from .maps import MapSpec

__all__ = [
    "DistanceOracle",
    "exact_dist_circle",
    "exact_dist_segment",
    "circle_oracle",
    "segment_oracle",
    "conformance_check",
    "ConformanceReport",
    "inverse_iteration_cloud",
    "BackwardCloud",
]


def exact_dist_circle(z: ComplexDyadic, bits: int = 64) -> tuple[Dyadic, Dyadic]:
    """Bracket of | |z| - 1 |, the distance to the unit circle."""
    s2 = z.abs2()
    lo = Dyadic.sqrt(s2, bits, "floor")
    hi = Dyadic.sqrt(s2, bits, "ceil")
    one = Dyadic(1)
    if lo >= one:
        return lo - one, hi - one
    if hi <= one:
        return one - hi, one - lo
    return Dyadic(0), dmax(hi - one, one - lo)


def exact_dist_segment(z: ComplexDyadic, bits: int = 64) -> tuple[Dyadic, Dyadic]:
    """Bracket of the distance to the segment [-2, 2] on the real axis."""
    two = Dyadic(2)
    ax = abs(z.re)
    ay = abs(z.im)
    if ax <= two:
        return ay, ay
    dx = ax - two
    s2 = dx * dx + ay * ay
    return Dyadic.sqrt(s2, bits, "floor"), Dyadic.sqrt(s2, bits, "ceil")


@dataclass
class DistanceOracle:
    """Exact distance bracket provider for a map with known Julia set."""

    map_id: str
    exact_dist: Callable[[ComplexDyadic, int], tuple[Dyadic, Dyadic]]
    sample_at_distance: Callable[[np.random.Generator, np.ndarray], np.ndarray]


def _sample_circle(rng: np.random.Generator, dists: np.ndarray) -> np.ndarray:
    ang = rng.uniform(0, 2 * np.pi, dists.shape[0])
    side = np.where(rng.uniform(size=dists.shape[0]) < 0.5, 1.0, -1.0)
    return (1.0 + side * dists) * np.exp(1j * ang)


def _sample_segment(rng: np.random.Generator, dists: np.ndarray) -> np.ndarray:
    n = dists.shape[0]
    kind = rng.uniform(size=n)
    x = rng.uniform(-2.0, 2.0, n)
    side = np.where(rng.uniform(size=n) < 0.5, 1.0, -1.0)
    out = x + 1j * side * dists
    # a share of samples beyond the endpoints
    cap = kind < 0.2
    phi = rng.uniform(-np.pi / 2, np.pi / 2, n)
    endpoint = np.where(rng.uniform(size=n) < 0.5, 2.0, -2.0)
    out_cap = endpoint + np.sign(endpoint) * dists * np.cos(phi) \
        + 1j * dists * np.sin(phi)
    out[cap] = out_cap[cap]
    return out


def circle_oracle() -> DistanceOracle:
    return DistanceOracle("circle", exact_dist_circle, _sample_circle)


def segment_oracle() -> DistanceOracle:
    return DistanceOracle("segment", exact_dist_segment, _sample_segment)


@dataclass
class ConformanceRow:
    n: int
    stratum: str
    samples: int
    violations: int
    band_occupancy: int


@dataclass
class ConformanceReport:
    map_id: str
    rows: list[ConformanceRow] = field(default_factory=list)

    @property
    def total_violations(self) -> int:
        return sum(r.violations for r in self.rows)

    @property
    def total_samples(self) -> int:
        return sum(r.samples for r in self.rows)

    @property
    def passed(self) -> bool:
        return self.total_violations == 0

    def summary(self) -> dict:
        return {"map": self.map_id, "samples": self.total_samples,
                "violations": self.total_violations,
                "pass": self.passed}

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["n", "stratum", "samples", "violations", "band_occupancy"])
            for r in self.rows:
                w.writerow([r.n, r.stratum, r.samples, r.violations, r.band_occupancy])


def _stratified_distances(rng: np.random.Generator, count: int,
                          gapq: float, qn: float, far_cap: float) -> np.ndarray:
    """Distance targets hitting the forced-close, free, and forced-far
    bands (classification is redone exactly afterwards)."""
    n_close = count * 3 // 10
    n_band = count * 3 // 10
    n_far = count - n_close - n_band
    close = gapq * 0.5 * rng.uniform(size=n_close) ** 2
    band = np.exp(rng.uniform(np.log(gapq * 1.05), np.log(qn * 0.95), n_band))
    far = np.exp(rng.uniform(np.log(qn * 1.1), np.log(max(far_cap, qn * 4)), n_far))
    return np.concatenate([close, band, far])


def conformance_check(map_spec: MapSpec, cert: Certificate,
                      oracle: DistanceOracle, n_list: list[int],
                      samples_per_n: int = 10000, seed: int = 20260810,
                      engine: str = "auto") -> ConformanceReport:
    """Contract check: no verdict 1 with true distance below the gap
    band, no verdict 0 with true distance above 2**-(n+1)."""
    report = ConformanceReport(oracle.map_id)
    rng = np.random.default_rng(seed)
    for n in n_list:
        ctx = get_context(cert, map_spec, n)
        gapq = gap_K(cert, n).scale2(-(n + 1))
        gapq_f = gapq.to_float()
        qn_dy = Dyadic(1, -(n + 1))
        qn = qn_dy.to_float()
        dists = _stratified_distances(rng, samples_per_n, gapq_f, qn, 0.4)
        pts = oracle.sample_at_distance(rng, dists)
        zx = pts.real.copy()
        zy = pts.imag.copy()

        in_u = member_batch(zx, zy, ctx.bitmap, ctx.ox, ctx.oy, ctx.scale)
        bit = np.ones(zx.shape[0], dtype=np.int8)  # outside U answers "far"
        idx = np.nonzero(in_u)[0]
        if idx.size:
            res = probe_points(ctx, zx[idx], zy[idx], engine)
            if res.err.any():
                raise RuntimeError("precision exhausted during conformance run")
            bit[idx] = res.bit

        counts = {"close": [0, 0, 0], "band": [0, 0, 0], "far": [0, 0, 0]}
        for k in range(zx.shape[0]):
            z = ComplexDyadic(Dyadic.from_float(float(zx[k])),
                              Dyadic.from_float(float(zy[k])))
            lo, hi = oracle.exact_dist(z, n + 40)
            if hi < gapq:
                stratum = "close"
            elif lo > qn_dy:
                stratum = "far"
            else:
                stratum = "band"
            violation = int((bit[k] == 1 and hi < gapq)
                            or (bit[k] == 0 and lo > qn_dy))
            c = counts[stratum]
            c[0] += 1
            c[1] += violation
            c[2] += int(stratum == "band")
        for stratum in ("close", "band", "far"):
            c = counts[stratum]
            report.rows.append(ConformanceRow(n, stratum, c[0], c[1], c[2]))
    return report


@dataclass
class BackwardCloud:
    points: np.ndarray
    depth: int


def inverse_iteration_cloud(map_spec: MapSpec, depth: int,
                            seed_point: ComplexDyadic, count: int,
                            rng_seed: int = 7) -> BackwardCloud:
    """Random backward orbits of the given length: count points from the
    depth-fold preimage tree (dense in the Julia set, uncertified)."""
    rng = np.random.default_rng(rng_seed)
    pts = np.full(count, seed_point.to_complex(), dtype=np.complex128)
    prev = pts
    nre, nim, _, *_ = map_spec.float_view()
    coef = nre + 1j * nim
    if map_spec.kind == "polynomial" and map_spec.degree == 2:
        a0, a1, a2 = coef[0], coef[1], coef[2]
        for _ in range(depth):
            prev = pts
            disc = np.sqrt(a1 * a1 - 4.0 * a2 * (a0 - pts))
            sign = np.where(rng.uniform(size=count) < 0.5, 1.0, -1.0)
            pts = (-a1 + sign * disc) / (2.0 * a2)
    else:
        from .maps import preimages_complex
        for _ in range(depth):
            prev = pts
            new = np.empty_like(pts)
            for k in range(count):
                roots = preimages_complex(map_spec, pts[k:k + 1])
                new[k] = roots[rng.integers(0, len(roots))]
            pts = new
    if depth > 0:
        resid = np.abs(np.polyval(coef[::-1], pts) - prev)
        if map_spec.kind == "rational":
            resid = None  # forward check covered inside preimages_complex
        if resid is not None and (not np.all(np.isfinite(pts))
                                  or float(np.max(resid)) > 1e-7):
            raise RootFindingFailure("backward orbit drifted off the preimage tree")
    return BackwardCloud(pts, depth)
