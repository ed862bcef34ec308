"""Finite unions of closed dyadic squares.

A BoxCover represents a neighborhood of a Julia set (or a coarse Julia
approximation) as a set of closed squares of side 2**-m with corners on
the 2**-m grid.  Boxes are closed, and membership on shared edges counts
for every adjacent box: the decision algorithm only needs a sound
"inside" test, and over-inclusion is harmless.

Covers are immutable after construction; all queries are pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .dyadic import ComplexDyadic, Dyadic, dmax
from .errors import InvalidConstants, PointInsideCover, RootFindingFailure

__all__ = [
    "BoxCover",
    "ValidationReport",
    "contains",
    "dist_lower",
    "inflate",
    "build_cover_inverse_iteration",
    "validate_Ucond",
]


@dataclass
class ValidationReport:
    """Outcome of a structured validation: named checks with witnesses."""

    checks: list[tuple[str, bool, str]] = field(default_factory=list)
    notes: str = ""

    @property
    def overall(self) -> bool:
        return all(ok for _, ok, _ in self.checks)

    def add(self, name: str, ok: bool, witness: str = "") -> None:
        self.checks.append((name, ok, witness))

    def failures(self) -> list[tuple[str, str]]:
        return [(n, w) for n, ok, w in self.checks if not ok]

    def __str__(self) -> str:
        lines = [f"[{'PASS' if ok else 'FAIL'}] {n}" + (f" -- {w}" if w else "")
                 for n, ok, w in self.checks]
        if self.notes:
            lines.append(f"note: {self.notes}")
        lines.append(f"overall: {'PASS' if self.overall else 'FAIL'}")
        return "\n".join(lines)


class BoxCover:
    """Sorted set of box indices at a fixed resolution m.

    Box (ix, iy) is the closed square [ix, ix+1] x [iy, iy+1] scaled by
    2**-m.
    """

    __slots__ = ("m", "boxes", "_bitmap", "_origin", "_keyset")

    def __init__(self, m: int, boxes: np.ndarray):
        if m < 0:
            raise InvalidConstants("cover resolution must be >= 0")
        arr = np.asarray(boxes, dtype=np.int64).reshape(-1, 2)
        if arr.shape[0] == 0:
            raise InvalidConstants("cover must contain at least one box")
        arr = np.unique(arr, axis=0)
        self.m = m
        self.boxes = arr
        self._bitmap = None
        self._origin = None
        self._keyset = None

    # -- derived structures (lazy) ------------------------------------

    def bitmap(self) -> tuple[np.ndarray, tuple[int, int]]:
        """Dense boolean occupancy grid plus its (ix0, iy0) origin."""
        if self._bitmap is None:
            ix0, iy0 = self.boxes.min(axis=0)
            ix1, iy1 = self.boxes.max(axis=0)
            bm = np.zeros((int(ix1 - ix0 + 1), int(iy1 - iy0 + 1)), dtype=bool)
            bm[self.boxes[:, 0] - ix0, self.boxes[:, 1] - iy0] = True
            self._bitmap = bm
            self._origin = (int(ix0), int(iy0))
        return self._bitmap, self._origin

    def _keys(self) -> set[int]:
        if self._keyset is None:
            self._keyset = set(
                (int(ix) << 34) ^ (int(iy) & ((1 << 34) - 1))
                for ix, iy in self.boxes
            )
        return self._keyset

    def has_box(self, ix: int, iy: int) -> bool:
        return ((ix << 34) ^ (iy & ((1 << 34) - 1))) in self._keys()

    # -- geometry ------------------------------------------------------

    @property
    def n_boxes(self) -> int:
        return int(self.boxes.shape[0])

    def index_bbox(self) -> tuple[int, int, int, int]:
        ix0, iy0 = self.boxes.min(axis=0)
        ix1, iy1 = self.boxes.max(axis=0)
        return int(ix0), int(iy0), int(ix1), int(iy1)

    def bounding_rect(self) -> tuple[Dyadic, Dyadic, Dyadic, Dyadic]:
        """(x0, y0, x1, y1) dyadic rectangle enclosing the union."""
        ix0, iy0, ix1, iy1 = self.index_bbox()
        s = -self.m
        return (Dyadic(ix0, s), Dyadic(iy0, s), Dyadic(ix1 + 1, s), Dyadic(iy1 + 1, s))

    def diam_upper(self) -> Dyadic:
        """Dyadic upper bound on the diameter of the union."""
        ix0, iy0, ix1, iy1 = self.index_bbox()
        w = Dyadic(ix1 + 1 - ix0, -self.m)
        h = Dyadic(iy1 + 1 - iy0, -self.m)
        return Dyadic.sqrt(w * w + h * h, self.m + 8, "ceil")

    def box_centers(self) -> np.ndarray:
        """Float64 centers of all boxes (exact: dyadic with m+1 frac bits)."""
        return (self.boxes.astype(np.float64) + 0.5) * 2.0**-self.m

    def __eq__(self, other) -> bool:
        return (isinstance(other, BoxCover) and self.m == other.m
                and self.boxes.shape == other.boxes.shape
                and bool(np.all(self.boxes == other.boxes)))

    def __repr__(self) -> str:
        return f"BoxCover(m={self.m}, boxes={self.n_boxes})"

    # -- file format ----------------------------------------------------

    def to_text(self) -> str:
        """Run-length encoded text form; round-trips bit-exactly."""
        ix0, iy0, ix1, iy1 = self.index_bbox()
        out = ["certjulia-cover 1", f"m {self.m}", f"bbox {ix0} {iy0} {ix1} {iy1}"]
        # boxes sorted by (iy, ix) for row encoding
        order = np.lexsort((self.boxes[:, 0], self.boxes[:, 1]))
        sorted_boxes = self.boxes[order]
        row_start = 0
        n = sorted_boxes.shape[0]
        while row_start < n:
            iy = sorted_boxes[row_start, 1]
            row_end = row_start
            while row_end < n and sorted_boxes[row_end, 1] == iy:
                row_end += 1
            xs = sorted_boxes[row_start:row_end, 0]
            runs = []
            a = b = int(xs[0])
            for x in xs[1:]:
                x = int(x)
                if x == b + 1:
                    b = x
                else:
                    runs.append(f"{a}..{b}" if b > a else f"{a}")
                    a = b = x
            runs.append(f"{a}..{b}" if b > a else f"{a}")
            out.append(f"row {int(iy)} " + " ".join(runs))
            row_start = row_end
        return "\n".join(out) + "\n"

    @staticmethod
    def from_text(text: str) -> "BoxCover":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("certjulia-cover"):
            raise ValueError("not a cover file")
        m = None
        boxes: list[tuple[int, int]] = []
        for ln in lines[1:]:
            parts = ln.split()
            if parts[0] == "m":
                m = int(parts[1])
            elif parts[0] == "bbox":
                continue
            elif parts[0] == "row":
                iy = int(parts[1])
                for tok in parts[2:]:
                    if ".." in tok:
                        a, b = tok.split("..")
                        boxes.extend((ix, iy) for ix in range(int(a), int(b) + 1))
                    else:
                        boxes.append((int(tok), iy))
        if m is None:
            raise ValueError("cover file missing resolution")
        return BoxCover(m, np.array(boxes, dtype=np.int64))

    def save(self, path) -> None:
        with open(path, "w") as f:
            f.write(self.to_text())

    @staticmethod
    def load(path) -> "BoxCover":
        with open(path) as f:
            return BoxCover.from_text(f.read())


def _axis_candidates(x: Dyadic, m: int) -> tuple[int, ...]:
    """Box indices along one axis whose closed extent contains x, exactly.

    A point on a grid line belongs to both adjacent boxes.
    """
    shift = x.e + m
    if shift >= 0:
        k = x.m << shift
        return (k - 1, k)
    s = -shift
    k = x.m >> s
    on_line = (x.m & ((1 << s) - 1)) == 0
    return (k - 1, k) if on_line else (k,)


def contains(cover: BoxCover, z: ComplexDyadic) -> bool:
    """Exact membership in the closed union (no tolerance)."""
    for ix in _axis_candidates(z.re, cover.m):
        for iy in _axis_candidates(z.im, cover.m):
            if cover.has_box(ix, iy):
                return True
    return False


def dist_lower(cover: BoxCover, z: ComplexDyadic) -> Dyadic:
    """Dyadic lower bound on the Euclidean distance from z to the cover,
    exact up to 2**-(m+4).  Raises PointInsideCover when z is inside."""
    if contains(cover, z):
        raise PointInsideCover(f"point {z} lies in the cover")
    scale = 2.0**-cover.m
    x = z.re.to_float()
    y = z.im.to_float()
    bx = cover.boxes[:, 0].astype(np.float64) * scale
    by = cover.boxes[:, 1].astype(np.float64) * scale
    dx = np.maximum(np.maximum(bx - x, x - (bx + scale)), 0.0)
    dy = np.maximum(np.maximum(by - y, y - (by + scale)), 0.0)
    d = float(np.sqrt(np.min(dx * dx + dy * dy)))
    # directed slack: float conversions and the sqrt are within 2^-45
    # relative here, far below the 2^-(m+4) accuracy contract
    lo = d * (1.0 - 2.0**-30) - 2.0**-45
    out = Dyadic.from_float(max(lo, 0.0)).round_frac(cover.m + 8, "floor")
    return dmax(Dyadic(0), out)


def inflate(cover: BoxCover, t: Dyadic) -> BoxCover:
    """Cover containing the closed t-neighborhood (whole-box Chebyshev
    over-approximation).  t must be a non-negative multiple of 2**-m."""
    if t.m < 0:
        raise InvalidConstants("inflate amount must be >= 0")
    if t.m == 0:
        return cover
    shift = t.e + cover.m
    if shift < 0:
        raise InvalidConstants("inflate amount must be a multiple of the box size")
    k = t.m << shift
    bm, (ix0, iy0) = cover.bitmap()
    padded = np.zeros((bm.shape[0] + 2 * k, bm.shape[1] + 2 * k), dtype=bool)
    padded[k:k + bm.shape[0], k:k + bm.shape[1]] = bm
    padded = ndimage.binary_dilation(padded, structure=np.ones((2 * k + 1, 1), bool))
    padded = ndimage.binary_dilation(padded, structure=np.ones((1, 2 * k + 1), bool))
    idx = np.argwhere(padded)
    idx[:, 0] += ix0 - k
    idx[:, 1] += iy0 - k
    return BoxCover(cover.m, idx)


def _boxes_of_points(pts: np.ndarray, m: int) -> np.ndarray:
    """Exact boxing of float points (floats are dyadic; scaling by 2**m is
    exact, and points on grid lines land in both adjacent boxes)."""
    out = []
    for coordpair in (pts,):
        sx = coordpair.real * 2.0**m
        sy = coordpair.imag * 2.0**m
        fx = np.floor(sx)
        fy = np.floor(sy)
        on_x = sx == fx
        on_y = sy == fy
        ix = fx.astype(np.int64)
        iy = fy.astype(np.int64)
        out.append(np.stack([ix, iy], axis=1))
        if on_x.any():
            out.append(np.stack([ix[on_x] - 1, iy[on_x]], axis=1))
        if on_y.any():
            out.append(np.stack([ix[on_y], iy[on_y] - 1], axis=1))
        both = on_x & on_y
        if both.any():
            out.append(np.stack([ix[both] - 1, iy[both] - 1], axis=1))
    return np.concatenate(out, axis=0)


def build_cover_inverse_iteration(map_spec, depth: int, m: int,
                                  seed: ComplexDyadic,
                                  max_points: int = 1 << 22) -> BoxCover:
    """Boxes hit by the full backward tree of preimages of the seed.

    The point cloud is dense in the Julia set as depth grows but is NOT
    certified; it is scaffolding for certificates and tests only.
    """
    from .maps import preimages_complex

    pts = np.array([seed.to_complex()], dtype=np.complex128)
    for _ in range(depth):
        pts = preimages_complex(map_spec, pts)
        if pts.size > max_points:
            raise RootFindingFailure(
                f"backward tree exceeds {max_points} points; lower the depth")
    return BoxCover(m, _boxes_of_points(pts, m))


def _grid_ceil(t: Dyadic, m: int) -> Dyadic:
    """Smallest multiple of 2**-m that is >= t."""
    return t.round_frac(m, "ceil")


def _grid_floor(t: Dyadic, m: int) -> Dyadic:
    return t.round_frac(m, "floor")


def validate_Ucond(map_spec, U: BoxCover, julia_approx: BoxCover,
                   eps: Dyadic, r: Dyadic,
                   margin: Dyadic = Dyadic(1, -3)) -> ValidationReport:
    """Check the neighborhood conditions tying U to the Julia set:

      (a) the 2*eps-neighborhood of the Julia approximation lies in U, and
      (b) the map image of the eps-inflated U lies inside the
          (r * (1 - margin))-neighborhood of the Julia approximation.

    A pass is sound relative to the accuracy of julia_approx; the margin
    is the budget reserved for that accuracy.
    """
    from .maps import eval_f_image_boxes

    report = ValidationReport()
    report.notes = ("pass is sound relative to julia_approx accuracy; "
                    f"margin reserved: {margin}")
    if not (eps.m > 0 and r.m > 0 and eps < r):
        report.add("eps-r-range", False, f"need 0 < eps < r, got eps={eps} r={r}")
        return report
    report.add("eps-r-range", True)

    grown = inflate(julia_approx, _grid_ceil(eps.scale2(1), U.m)) \
        if julia_approx.m == U.m else None
    if grown is None:
        # resample julia_approx onto U's grid by exact re-boxing of corners
        report.add("resolution-match", False,
                   f"julia_approx at m={julia_approx.m}, U at m={U.m}")
        return report
    report.add("resolution-match", True)

    missing = [tuple(b) for b in grown.boxes if not U.has_box(int(b[0]), int(b[1]))]
    report.add("julia-2eps-inside-U", not missing,
               f"{len(missing)} boxes escape U, e.g. {missing[:5]}" if missing else "")

    scaled = Dyadic(1) - margin
    target = inflate(julia_approx, _grid_floor(r * scaled, julia_approx.m))
    big_u = inflate(U, _grid_ceil(eps, U.m))
    bad = eval_f_image_boxes(map_spec, big_u, target)
    report.add("image-inside-r-neighborhood", len(bad) == 0,
               f"{len(bad)} boxes map outside, e.g. {bad[:5]}" if bad else "")
    return report
