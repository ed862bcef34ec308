"""Benchmarks: verdict-cost scaling in the precision parameter, and the
numba-versus-numpy kernel comparison.

The scaling benchmark times subprogram calls only (the pixel layer's
subdivision multiplicity is reported separately by the render stats) and
fits log(median time) against log(n) by least squares.  It runs on the
exact big-integer engine by default: the float64 kernel hands high-n
points to the exact engine anyway, and timing a single engine keeps the
fit free of an engine-switch discontinuity.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels, kernels_numpy
from .certificate import Certificate, L_of
from .cover import contains
from .decider import get_context, subprogram
from .dyadic import ComplexDyadic, Dyadic
from .errors import InvalidConstants
from .maps import MapSpec

__all__ = ["benchmark_scaling", "ScalingReport", "kernel_comparison"]


@dataclass
class ScalingRow:
    n: int
    points: int
    median_us: float
    p90_us: float
    max_iterations: int
    iter_budget: int


@dataclass
class ScalingReport:
    rows: list[ScalingRow] = field(default_factory=list)
    fitted_exponent: float = 0.0
    engine: str = "exact"

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["n", "points", "median_us", "p90_us",
                        "max_iterations", "iter_budget", "fitted_exponent"])
            for r in self.rows:
                w.writerow([r.n, r.points, f"{r.median_us:.3f}",
                            f"{r.p90_us:.3f}", r.max_iterations,
                            r.iter_budget, f"{self.fitted_exponent:.4f}"])

    def __str__(self) -> str:
        lines = [f"{'n':>4} {'points':>7} {'median_us':>11} {'p90_us':>9} "
                 f"{'max_iter':>8} {'L(n)':>6}"]
        for r in self.rows:
            lines.append(f"{r.n:>4} {r.points:>7} {r.median_us:>11.2f} "
                         f"{r.p90_us:>9.2f} {r.max_iterations:>8} {r.iter_budget:>6}")
        lines.append(f"fitted exponent: {self.fitted_exponent:.3f} "
                     f"(engine: {self.engine})")
        return "\n".join(lines)


def benchmark_scaling(map_spec: MapSpec, cert: Certificate,
                      points: list[ComplexDyadic], n_list: list[int],
                      engine: str = "exact",
                      csv_path=None) -> ScalingReport:
    """Median per-verdict time and iteration counts across n."""
    report = ScalingReport(engine=engine)
    usable = [z for z in points if contains(cert.U, z)]
    if not usable:
        raise InvalidConstants("no benchmark points lie inside U")
    for n in n_list:
        if n < cert.n0:
            raise InvalidConstants(f"benchmark n={n} below certificate n0={cert.n0}")
        get_context(cert, map_spec, n)  # warm caches outside the timing
        times = np.empty(len(usable))
        max_it = 0
        for k, z in enumerate(usable):
            t0 = time.perf_counter_ns()
            v = subprogram(cert, map_spec, n, z, engine=engine)
            times[k] = (time.perf_counter_ns() - t0) / 1000.0
            max_it = max(max_it, v.iterations_used)
        report.rows.append(ScalingRow(
            n, len(usable), float(np.median(times)),
            float(np.percentile(times, 90)), max_it, L_of(cert, n)))
    xs = np.log([r.n for r in report.rows])
    ys = np.log([max(r.median_us, 1e-3) for r in report.rows])
    if len(report.rows) >= 2:
        report.fitted_exponent = float(np.polyfit(xs, ys, 1)[0])
    if csv_path:
        report.write_csv(csv_path)
    return report


def near_set_points(cert: Certificate, count: int = 1000,
                    seed: int = 11) -> list[ComplexDyadic]:
    """Benchmark points drawn near the Julia approximation, inside U."""
    rng = np.random.default_rng(seed)
    centers = cert.julia_approx.box_centers()
    out = []
    tries = 0
    while len(out) < count and tries < 40 * count:
        tries += 1
        k = int(rng.integers(0, centers.shape[0]))
        dx, dy = rng.normal(scale=2.0**-cert.U.m, size=2)
        z = ComplexDyadic(Dyadic.from_float(float(centers[k, 0] + dx)),
                          Dyadic.from_float(float(centers[k, 1] + dy)))
        if contains(cert.U, z):
            out.append(z)
    return out


def _time_call(fn, repeats=3):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def kernel_comparison(n_points: int = 200_000, nu: int = 11,
                      csv_path=None) -> list[dict]:
    """Numba versus numpy engine on identical workloads; verifies the
    outputs agree bit-for-bit while timing both."""
    from .presets import circle_certificate, circle_map

    cert = circle_certificate()
    f = circle_map()
    ctx = get_context(cert, f, nu)
    rng = np.random.default_rng(3)
    t = rng.uniform(-0.04, 0.04, n_points)
    a = rng.uniform(0, 2 * np.pi, n_points)
    zx = (1 + t) * np.cos(a)
    zy = (1 + t) * np.sin(a)
    keep = kernels_numpy.member_batch(zx, zy, ctx.bitmap, ctx.ox, ctx.oy, ctx.scale)
    zx, zy = zx[keep], zy[keep]
    args = (zx, zy, *ctx.coef, *ctx.dcoef, ctx.L, ctx.q_f, ctx.thresholds_f,
            ctx.k2c_f, ctx.k1_down, ctx.gapq_f, ctx.bitmap, ctx.ox, ctx.oy,
            ctx.scale)
    nre, nim, _ = ctx.coef
    dre, dim_, _ = ctx.dcoef
    rows = []

    workloads = [
        ("verdict", lambda: kernels_numpy.probe_batch(*args),
         (lambda: kernels.probe_batch(*args)) if kernels.NUMBA_ACTIVE else None),
        ("escape", lambda: kernels_numpy.escape_batch(zx, zy, nre, nim, 128, 4.0),
         (lambda: kernels.escape_batch(zx, zy, nre, nim, 128, 4.0))
         if kernels.NUMBA_ACTIVE else None),
        ("dem", lambda: kernels_numpy.dem_batch(zx, zy, nre, nim, dre, dim_, 128, 1e8),
         (lambda: kernels.dem_batch(zx, zy, nre, nim, dre, dim_, 128, 1e8))
         if kernels.NUMBA_ACTIVE else None),
    ]
    for name, np_fn, nb_fn in workloads:
        row = {"kernel": name, "points": int(zx.size),
               "numpy_s": _time_call(np_fn), "numba_s": None,
               "speedup": None, "identical": None}
        if nb_fn is not None:
            nb_fn()  # compile outside the timing
            row["numba_s"] = _time_call(nb_fn)
            row["speedup"] = row["numpy_s"] / row["numba_s"]
            a_out = np_fn()
            b_out = nb_fn()
            if isinstance(a_out, tuple):
                row["identical"] = all(np.array_equal(x, y)
                                       for x, y in zip(a_out, b_out))
            else:
                row["identical"] = bool(np.array_equal(a_out, b_out))
        rows.append(row)
    if csv_path:
        with open(csv_path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
            w.writeheader()
            for row in rows:
                w.writerow(row)
    return rows
