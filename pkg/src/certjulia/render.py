"""Bitmap rendering: certified verdict rasters plus uncertified baselines.

The certified mode renders pixel (i, j) as the certified fill/blank bit
at center ((gx0+i), (gy0+j)) / 2**(n+2), with the region corners snapped
outward onto that grid.  Work is chunked into fixed row bands whose
layout does not depend on the thread count, and the kernels write one
output slot per pixel, so bitmaps are bit-identical for any thread count.

Escape-time and distance-estimator modes are classical uncertified
renderers kept as baselines; their bitmaps are labeled UNCERTIFIED in the
stats.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .certificate import Certificate, validate
from .decider import ResolveStats, coarse_pixel_value, resolve_pixels
from .dyadic import ComplexDyadic, Dyadic
from .errors import CertificateInvalid, InvalidConstants
from .floatball import derivative_coeffs
from .maps import MapSpec

__all__ = ["RenderRequest", "RenderStats", "render", "render_escape_time",
           "render_dem", "write_pgm", "read_pgm", "snap_region"]


@dataclass
class RenderRequest:
    map_path: str | Path | None = None
    cert_path: str | Path | None = None
    map_spec: MapSpec | None = None
    certificate: Certificate | None = None
    region: tuple[Dyadic, Dyadic, Dyadic, Dyadic] = None
    n: int = 8
    mode: str = "certified"
    threads: int = 1
    out_path: str | Path | None = None
    stats_path: str | Path | None = None
    png_path: str | Path | None = None
    error_mask_path: str | Path | None = None
    allow_unvalidated: bool = False
    max_iter: int = 256
    engine: str = "auto"


@dataclass
class RenderStats:
    mode: str = "certified"
    uncertified: bool = False
    n: int = 0
    threads: int = 1
    engine: str = ""
    width: int = 0
    height: int = 0
    wall_s: float = 0.0
    per_pixel_us_p50: float = 0.0
    per_pixel_us_p95: float = 0.0
    resolve: ResolveStats = field(default_factory=ResolveStats)
    band_times: list = field(default_factory=list)

    def rows(self) -> list[tuple[str, str]]:
        out = [
            ("mode", self.mode),
            ("uncertified", str(self.uncertified)),
            ("n", str(self.n)),
            ("threads", str(self.threads)),
            ("engine", self.engine),
            ("width", str(self.width)),
            ("height", str(self.height)),
            ("pixels", str(self.width * self.height)),
            ("wall_s", f"{self.wall_s:.6f}"),
            ("per_pixel_us_p50", f"{self.per_pixel_us_p50:.4f}"),
            ("per_pixel_us_p95", f"{self.per_pixel_us_p95:.4f}"),
            ("outside_u", str(self.resolve.outside_u)),
            ("center_fill", str(self.resolve.center_fill)),
            ("center_blank", str(self.resolve.center_blank)),
            ("straddle_pixels", str(self.resolve.straddle)),
            ("probes", str(self.resolve.probes)),
            ("subdivision_levels", str(self.resolve.levels_used)),
            ("exact_fallbacks", str(self.resolve.exact_fallbacks)),
            ("max_work_bits", str(self.resolve.max_work_bits)),
            ("error_pixels", str(len(self.resolve.error_pixels))),
        ]
        for name, cnt in sorted(self.resolve.reason_counts.items()):
            out.append((f"exit_{name}", str(cnt)))
        hist = self.resolve.iter_hist
        for k in np.nonzero(hist)[0]:
            out.append((f"iter_hist_{int(k)}", str(int(hist[k]))))
        return out

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["metric", "value"])
            for k, v in self.rows():
                w.writerow([k, v])


def snap_region(region, n: int) -> tuple[int, int, int, int]:
    """Snap region corners outward onto the 2**-(n+2) grid; returns the
    integer grid coordinates (gx0, gy0, gx1, gy1)."""
    x0, y0, x1, y1 = region
    if not (x0 < x1 and y0 < y1):
        raise InvalidConstants("region must have positive extent")
    b = n + 2

    def down(v: Dyadic) -> int:
        r = v.round_frac(b, "floor")
        return r.m << (r.e + b) if r.e + b >= 0 else r.m >> -(r.e + b)

    def up(v: Dyadic) -> int:
        r = v.round_frac(b, "ceil")
        return r.m << (r.e + b) if r.e + b >= 0 else r.m >> -(r.e + b)

    return down(x0), down(y0), up(x1), up(y1)


def write_pgm(path, bitmap: np.ndarray) -> None:
    """1-bit portable bitmap (P4); bit 1 = filled = black.  This packed
    format is the bit-exact artifact of record."""
    h, w = bitmap.shape
    packed = np.packbits(bitmap.astype(np.uint8), axis=1)
    with open(path, "wb") as f:
        f.write(f"P4\n{w} {h}\n".encode())
        f.write(packed.tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as f:
        magic = f.readline().strip()
        if magic != b"P4":
            raise ValueError("not a P4 bitmap")
        line = f.readline()
        while line.startswith(b"#"):
            line = f.readline()
        w, h = (int(t) for t in line.split())
        data = np.frombuffer(f.read(), dtype=np.uint8)
    rows = data.reshape(h, -1)
    bits = np.unpackbits(rows, axis=1)[:, :w]
    return bits


def _write_png(path, bitmap: np.ndarray) -> None:
    from PIL import Image

    img = Image.fromarray(((1 - bitmap) * 255).astype(np.uint8), mode="L")
    img.save(path)


def _band_iter(gx0, gy0, gx1, gy1, max_band_pixels=4_000_000):
    w = gx1 - gx0
    band_rows = max(1, min(512, max_band_pixels // max(w, 1)))
    row = gy0
    while row < gy1:
        top = min(row + band_rows, gy1)
        yield row, top
        row = top


def _load(req: RenderRequest) -> tuple[MapSpec, Certificate | None]:
    f = req.map_spec if req.map_spec is not None else MapSpec.load(req.map_path)
    cert = req.certificate
    if cert is None and req.cert_path is not None:
        cert = Certificate.load(req.cert_path)
    return f, cert


def render(req: RenderRequest) -> tuple[np.ndarray, RenderStats]:
    """Render per the request; returns (bitmap, stats).

    Bitmap rows run top-down (row 0 holds the highest y).  For certified
    mode the certificate is validated first unless allow_unvalidated.
    """
    f, cert = _load(req)
    if req.mode == "escape":
        return render_escape_time(f, req.region, req.n, req.max_iter, req.threads)
    if req.mode == "dem":
        return render_dem(f, req.region, req.n, req.max_iter, req.threads)
    if req.mode != "certified":
        raise InvalidConstants(f"unknown render mode {req.mode!r}")
    if cert is None:
        raise InvalidConstants("certified mode needs a certificate")
    if not req.allow_unvalidated:
        rep = validate(cert, f)
        if not rep.overall:
            raise CertificateInvalid(str(rep))

    kernels.set_num_threads(req.threads)
    gx0, gy0, gx1, gy1 = snap_region(req.region, req.n)
    w, h = gx1 - gx0, gy1 - gy0
    bitmap = np.zeros((h, w), dtype=np.uint8)
    stats = RenderStats(mode="certified", n=req.n, threads=req.threads,
                        engine=kernels.engine_name(), width=w, height=h)
    t0 = time.perf_counter()
    if req.n >= cert.n0:
        cols = np.arange(gx0, gx1, dtype=np.int64)
        for row_lo, row_hi in _band_iter(gx0, gy0, gx1, gy1):
            tb = time.perf_counter()
            rows = np.arange(row_lo, row_hi, dtype=np.int64)
            gx = np.tile(cols, rows.size)
            gy = np.repeat(rows, cols.size)
            bits, rstats = resolve_pixels(cert, f, req.n, gx, gy, req.engine)
            band = bits.reshape(rows.size, cols.size)
            # image rows run top-down
            bitmap[gy1 - row_hi:gy1 - row_lo, :] = band[::-1, :]
            if rstats.error_pixels:
                rstats.error_pixels = [
                    (int(p // cols.size + (row_lo - gy0)), int(p % cols.size))
                    for p in rstats.error_pixels]
            stats.resolve.merge(rstats)
            stats.band_times.append((rows.size * cols.size,
                                     time.perf_counter() - tb))
    else:
        # coarse path: n below the certificate's resolution floor
        for j in range(gy0, gy1):
            for i in range(gx0, gx1):
                z = ComplexDyadic(Dyadic(i, -(req.n + 2)), Dyadic(j, -(req.n + 2)))
                v = coarse_pixel_value(cert, req.n, z)
                bitmap[gy1 - 1 - j, i - gx0] = v
        stats.resolve.pixels = w * h
        stats.resolve.reason_counts["CoarseCover"] = w * h
    stats.wall_s = time.perf_counter() - t0
    if stats.band_times:
        per_px = np.array([t / max(p, 1) for p, t in stats.band_times]) * 1e6
        stats.per_pixel_us_p50 = float(np.percentile(per_px, 50))
        stats.per_pixel_us_p95 = float(np.percentile(per_px, 95))

    if req.out_path:
        write_pgm(req.out_path, bitmap)
    if req.png_path:
        _write_png(req.png_path, bitmap)
    if req.stats_path:
        stats.write_csv(req.stats_path)
    if req.error_mask_path and stats.resolve.error_pixels:
        mask = np.zeros_like(bitmap)
        for r, c in stats.resolve.error_pixels:
            mask[h - 1 - r, c] = 1
        write_pgm(req.error_mask_path, mask)
    return bitmap, stats


def _grid_floats(region, n):
    gx0, gy0, gx1, gy1 = snap_region(region, n)
    grid = 2.0 ** -(n + 2)
    xs = np.arange(gx0, gx1, dtype=np.float64) * grid
    ys = np.arange(gy0, gy1, dtype=np.float64) * grid
    return xs, ys, gx1 - gx0, gy1 - gy0


def render_escape_time(map_spec: MapSpec, region, n: int, max_iter: int = 256,
                       threads: int = 1) -> tuple[np.ndarray, RenderStats]:
    """Escape-time band render (UNCERTIFIED): a pixel is filled when its
    center survives at least ~n doublings before escaping, which over-
    covers the certified band for expanding polynomial maps."""
    if map_spec.kind != "polynomial":
        raise InvalidConstants("escape-time baseline requires a polynomial map")
    kernels.set_num_threads(threads)
    nre, nim, _, *_ = map_spec.float_view()
    xs, ys, w, h = _grid_floats(region, n)
    band_floor = max(1, min(n - 1, max_iter))
    bitmap = np.zeros((h, w), dtype=np.uint8)
    t0 = time.perf_counter()
    for j, y in enumerate(ys):
        counts = kernels.escape_batch(xs, np.full_like(xs, y), nre, nim,
                                      max_iter, 4.0)
        bitmap[h - 1 - j, :] = (counts >= band_floor).astype(np.uint8)
    stats = RenderStats(mode="escape", uncertified=True, n=n, threads=threads,
                        engine=kernels.engine_name(), width=w, height=h,
                        wall_s=time.perf_counter() - t0)
    stats.resolve.pixels = w * h
    return bitmap, stats


def render_dem(map_spec: MapSpec, region, n: int, max_iter: int = 256,
               threads: int = 1) -> tuple[np.ndarray, RenderStats]:
    """Distance-estimator render (UNCERTIFIED): fill when the classical
    estimate |z|log|z|/|z'| at escape is below the pixel spacing."""
    if map_spec.kind != "polynomial":
        raise InvalidConstants("distance-estimator baseline requires a polynomial map")
    kernels.set_num_threads(threads)
    nre, nim, nrad, *_ = map_spec.float_view()
    dre, dim_, _ = derivative_coeffs(nre, nim, nrad)
    xs, ys, w, h = _grid_floats(region, n)
    thr = 2.0 ** -(n + 2)
    bitmap = np.zeros((h, w), dtype=np.uint8)
    t0 = time.perf_counter()
    for j, y in enumerate(ys):
        est = kernels.dem_batch(xs, np.full_like(xs, y), nre, nim, dre, dim_,
                                max_iter, 1.0e8)
        bitmap[h - 1 - j, :] = ((est >= 0.0) & (est <= thr)).astype(np.uint8)
    stats = RenderStats(mode="dem", uncertified=True, n=n, threads=threads,
                        engine=kernels.engine_name(), width=w, height=h,
                        wall_s=time.perf_counter() - t0)
    stats.resolve.pixels = w * h
    return bitmap, stats
