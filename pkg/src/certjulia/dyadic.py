"""Exact dyadic rationals, complex dyadic points, and outward-rounded balls.

Every rigorous computation in the package flows through the types here.
`Dyadic` is an exact base-2 rational m * 2**e held in canonical form, so
addition and multiplication are exact; rounding only ever happens through
the explicitly directed helpers.  `Ball` is a complex disk whose radius is
only ever rounded outward, which gives the containment contract: the image
of every point of the input balls lies inside the output ball.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from .errors import InvalidConstants

__all__ = [
    "Dyadic",
    "ComplexDyadic",
    "Ball",
    "DyInterval",
    "CoefficientOracle",
    "ball_add",
    "ball_mul",
    "round_ball",
    "ball_abs_bounds",
    "ball_contains",
    "RADIUS_MANTISSA_BITS",
]

# Radii carry a short mantissa: precision of the radius affects sharpness
# only, never correctness, so 32 bits rounded up is plenty.
RADIUS_MANTISSA_BITS = 32

_POW2_RE = re.compile(r"^\s*(-?\d+)\s*\*\s*2\^(-?\d+)\s*$")
_DEC_RE = re.compile(r"^\s*(-?)(\d+)(?:\.(\d+))?\s*$")


class Dyadic:
    """Exact dyadic rational ``mantissa * 2**exponent``.

    Canonical form: the mantissa is odd or zero, and zero has exponent 0.
    """

    __slots__ = ("m", "e")

    def __init__(self, mantissa: int, exponent: int = 0):
        if mantissa == 0:
            self.m = 0
            self.e = 0
            return
        # strip trailing zero bits to keep the form canonical
        tz = (mantissa & -mantissa).bit_length() - 1
        self.m = mantissa >> tz
        self.e = exponent + tz

    # -- constructors -------------------------------------------------

    @staticmethod
    def from_int(n: int) -> "Dyadic":
        return Dyadic(n, 0)

    @staticmethod
    def from_float(x: float) -> "Dyadic":
        """Exact conversion; every finite float is a dyadic rational."""
        if not math.isfinite(x):
            raise ValueError(f"not a finite float: {x!r}")
        p, q = x.as_integer_ratio()
        return Dyadic(p, -(q.bit_length() - 1))

    @staticmethod
    def parse(text: str) -> "Dyadic":
        """Parse either ``m*2^e`` or an exact terminating decimal."""
        m = _POW2_RE.match(text)
        if m:
            return Dyadic(int(m.group(1)), int(m.group(2)))
        m = _DEC_RE.match(text)
        if not m:
            raise ValueError(f"cannot parse dyadic: {text!r}")
        sign = -1 if m.group(1) == "-" else 1
        ipart = int(m.group(2))
        frac = m.group(3) or ""
        k = len(frac)
        num = ipart * 10**k + (int(frac) if frac else 0)
        # num / 10^k is dyadic iff 5^k divides num
        five = 5**k
        if num % five != 0:
            raise ValueError(f"decimal is not a dyadic rational: {text!r}")
        return Dyadic(sign * (num // five), -k)

    # -- properties ----------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return self.m == 0

    @property
    def sign(self) -> int:
        return (self.m > 0) - (self.m < 0)

    def frac_bits(self) -> int:
        """Number of fractional bits (0 for integers)."""
        return max(0, -self.e)

    def floor_log2(self) -> int:
        """Largest k with 2**k <= |self|; requires self != 0."""
        if self.m == 0:
            raise InvalidConstants("log2 of zero")
        return abs(self.m).bit_length() - 1 + self.e

    def ceil_log2(self) -> int:
        """Smallest k with |self| <= 2**k; requires self != 0."""
        f = self.floor_log2()
        return f if abs(self.m) == 1 else f + 1

    # -- exact arithmetic ----------------------------------------------

    def _aligned(self, other: "Dyadic") -> tuple[int, int, int]:
        e = min(self.e, other.e)
        return self.m << (self.e - e), other.m << (other.e - e), e

    def __add__(self, other: "Dyadic") -> "Dyadic":
        a, b, e = self._aligned(other)
        return Dyadic(a + b, e)

    def __sub__(self, other: "Dyadic") -> "Dyadic":
        a, b, e = self._aligned(other)
        return Dyadic(a - b, e)

    def __mul__(self, other: "Dyadic") -> "Dyadic":
        return Dyadic(self.m * other.m, self.e + other.e)

    def __neg__(self) -> "Dyadic":
        return Dyadic(-self.m, self.e)

    def __abs__(self) -> "Dyadic":
        return Dyadic(abs(self.m), self.e)

    def scale2(self, k: int) -> "Dyadic":
        """Exact multiplication by 2**k."""
        return Dyadic(self.m, self.e + k)

    # -- comparisons (exact) --------------------------------------------

    def _cmp(self, other: "Dyadic") -> int:
        a, b, _ = self._aligned(other)
        return (a > b) - (a < b)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Dyadic) and self.m == other.m and self.e == other.e

    def __lt__(self, other: "Dyadic") -> bool:
        return self._cmp(other) < 0

    def __le__(self, other: "Dyadic") -> bool:
        return self._cmp(other) <= 0

    def __gt__(self, other: "Dyadic") -> bool:
        return self._cmp(other) > 0

    def __ge__(self, other: "Dyadic") -> bool:
        return self._cmp(other) >= 0

    def __hash__(self) -> int:
        return hash((self.m, self.e))

    # -- rounding -------------------------------------------------------

    def round_frac(self, bits: int, mode: str = "nearest") -> "Dyadic":
        """Round to the grid 2**-bits.

        mode: "floor" (toward -inf), "ceil" (toward +inf), "nearest"
        (ties away from zero).  Exact values are returned unchanged.
        """
        shift = self.e + bits
        if shift >= 0 or self.m == 0:
            return self
        s = -shift
        if mode == "floor":
            k = self.m >> s
        elif mode == "ceil":
            k = -((-self.m) >> s)
        elif mode == "nearest":
            half = 1 << (s - 1)
            if self.m > 0:
                k = (self.m + half) >> s
            else:
                k = -((-self.m + half) >> s)
        else:
            raise ValueError(f"bad rounding mode {mode!r}")
        return Dyadic(k, -bits)

    def mantissa_cap(self, bits: int = RADIUS_MANTISSA_BITS) -> "Dyadic":
        """Round a non-negative value up so the mantissa has <= bits bits."""
        if self.m < 0:
            raise InvalidConstants("mantissa_cap expects a non-negative value")
        bl = self.m.bit_length()
        if bl <= bits:
            return self
        s = bl - bits
        return Dyadic((self.m + (1 << s) - 1) >> s, self.e + s)

    # -- directed division and square root -------------------------------

    @staticmethod
    def div(a: "Dyadic", b: "Dyadic", bits: int, mode: str = "nearest") -> "Dyadic":
        """a / b rounded to the grid 2**-bits in the given direction."""
        if b.m == 0:
            raise ZeroDivisionError("dyadic division by zero")
        num, den = a.m, b.m
        net = a.e - b.e + bits
        if net >= 0:
            num <<= net
        else:
            den <<= -net
        if den < 0:
            num, den = -num, -den
        if mode == "floor":
            k = num // den
        elif mode == "ceil":
            k = -((-num) // den)
        elif mode == "nearest":
            k = (2 * num + den) // (2 * den)
        else:
            raise ValueError(f"bad rounding mode {mode!r}")
        return Dyadic(k, -bits)

    @staticmethod
    def sqrt(x: "Dyadic", bits: int, mode: str) -> "Dyadic":
        """Directed square root of x >= 0 on the grid 2**-bits."""
        if x.m < 0:
            raise InvalidConstants("sqrt of a negative dyadic")
        if x.m == 0:
            return Dyadic(0)
        shift = x.e + 2 * bits
        if shift >= 0:
            n = x.m << shift
            exact = True
        else:
            n = x.m >> (-shift)
            exact = (x.m & ((1 << -shift) - 1)) == 0
            if mode == "ceil" and not exact:
                n += 1
        k = math.isqrt(n)
        if mode == "ceil" and k * k < n:
            k += 1
        elif mode == "floor":
            pass
        elif mode not in ("floor", "ceil"):
            raise ValueError(f"bad rounding mode {mode!r}")
        return Dyadic(k, -bits)

    # -- float interop ----------------------------------------------------

    def to_float(self, mode: str = "nearest") -> float:
        """Convert to float64 with the given rounding direction."""
        neg = self.m < 0
        m = -self.m if neg else self.m
        bl = m.bit_length()
        if bl <= 53:
            x = math.ldexp(m, self.e)
            return -x if neg else x
        s = bl - 53
        top = m >> s
        rem = m & ((1 << s) - 1)
        if mode == "nearest":
            half = 1 << (s - 1)
            if rem > half or (rem == half and (top & 1)):
                top += 1
        elif (mode == "ceil" and not neg and rem) or (mode == "floor" and neg and rem):
            top += 1
        x = math.ldexp(top, self.e + s)
        return -x if neg else x

    def is_float_exact(self) -> bool:
        """True when to_float("nearest") is an exact representation."""
        if self.m == 0:
            return True
        if abs(self.m).bit_length() > 53:
            return False
        return math.isfinite(self.to_float()) and Dyadic.from_float(self.to_float()) == self

    # -- serialization -----------------------------------------------------

    def to_pow2_string(self) -> str:
        return f"{self.m}*2^{self.e}"

    def to_decimal_string(self) -> str:
        """Exact terminating decimal (every dyadic has one)."""
        if self.e >= 0:
            return str(self.m << self.e)
        k = -self.e
        digits = str(abs(self.m) * 5**k).rjust(k + 1, "0")
        out = digits[:-k] + "." + digits[-k:]
        out = out.rstrip("0").rstrip(".")
        return ("-" if self.m < 0 else "") + out

    def __str__(self) -> str:
        return self.to_decimal_string()

    def __repr__(self) -> str:
        return f"Dyadic({self.m}, {self.e})"


D0 = Dyadic(0)
D1 = Dyadic(1)


def dmax(a: Dyadic, b: Dyadic) -> Dyadic:
    return a if a >= b else b


def dmin(a: Dyadic, b: Dyadic) -> Dyadic:
    return a if a <= b else b


class ComplexDyadic:
    """Exact complex number with dyadic real and imaginary parts."""

    __slots__ = ("re", "im")

    def __init__(self, re: Dyadic, im: Dyadic):
        self.re = re
        self.im = im

    @staticmethod
    def from_ints(re: int, im: int = 0) -> "ComplexDyadic":
        return ComplexDyadic(Dyadic(re), Dyadic(im))

    @staticmethod
    def from_complex(z: complex) -> "ComplexDyadic":
        return ComplexDyadic(Dyadic.from_float(z.real), Dyadic.from_float(z.imag))

    def __add__(self, other: "ComplexDyadic") -> "ComplexDyadic":
        return ComplexDyadic(self.re + other.re, self.im + other.im)

    def __sub__(self, other: "ComplexDyadic") -> "ComplexDyadic":
        return ComplexDyadic(self.re - other.re, self.im - other.im)

    def __mul__(self, other: "ComplexDyadic") -> "ComplexDyadic":
        return ComplexDyadic(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
        )

    def __neg__(self) -> "ComplexDyadic":
        return ComplexDyadic(-self.re, -self.im)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, ComplexDyadic)
            and self.re == other.re
            and self.im == other.im
        )

    def __hash__(self) -> int:
        return hash((self.re, self.im))

    def abs2(self) -> Dyadic:
        """Exact squared modulus."""
        return self.re * self.re + self.im * self.im

    def abs_upper(self, bits: int = 32) -> Dyadic:
        return Dyadic.sqrt(self.abs2(), bits, "ceil")

    def abs_lower(self, bits: int = 32) -> Dyadic:
        return Dyadic.sqrt(self.abs2(), bits, "floor")

    def round_frac(self, bits: int, mode: str = "nearest") -> "ComplexDyadic":
        return ComplexDyadic(self.re.round_frac(bits, mode), self.im.round_frac(bits, mode))

    def to_complex(self) -> complex:
        return complex(self.re.to_float(), self.im.to_float())

    def __str__(self) -> str:
        return f"({self.re} + {self.im}i)"

    def __repr__(self) -> str:
        return f"ComplexDyadic({self.re!r}, {self.im!r})"


CD0 = ComplexDyadic(D0, D0)


class Ball:
    """Closed complex disk: center plus non-negative dyadic radius.

    The containment contract for every operation on balls: the output
    ball contains the exact image of every point of the input balls.
    """

    __slots__ = ("center", "radius")

    def __init__(self, center: ComplexDyadic, radius: Dyadic = D0):
        if radius.m < 0:
            raise InvalidConstants("ball radius must be non-negative")
        self.center = center
        self.radius = radius

    @staticmethod
    def point(z: ComplexDyadic) -> "Ball":
        return Ball(z, D0)

    def __repr__(self) -> str:
        return f"Ball({self.center!r}, r={self.radius})"


def _cap(r: Dyadic) -> Dyadic:
    return r.mantissa_cap(RADIUS_MANTISSA_BITS)


def round_ball(a: Ball, target_bits: int) -> Ball:
    """Round the center to <= target_bits fractional bits, inflating the
    radius by the rounding displacement so the output contains the input."""
    c = a.center.round_frac(target_bits, "nearest")
    if c == a.center:
        return Ball(c, a.radius)
    # per-coordinate displacement <= 2^-(t+1), so euclidean <= 3*2^-(t+2)
    return Ball(c, _cap(a.radius + Dyadic(3, -target_bits - 2)))


def ball_add(a: Ball, b: Ball, work_bits: int) -> Ball:
    return round_ball(Ball(a.center + b.center, _cap(a.radius + b.radius)), work_bits)


def ball_mul(a: Ball, b: Ball, work_bits: int) -> Ball:
    """Product ball: contains {x*y : x in a, y in b}."""
    c = a.center * b.center
    ca = a.center.abs_upper()
    cb = b.center.abs_upper()
    rad = ca * b.radius + cb * a.radius + a.radius * b.radius
    return round_ball(Ball(c, _cap(rad)), work_bits)


def ball_abs_bounds(a: Ball, work_bits: int = 64) -> tuple[Dyadic, Dyadic]:
    """(lo, hi) with lo <= |x| <= hi for every x in the ball."""
    s2 = a.center.abs2()
    lo = Dyadic.sqrt(s2, work_bits, "floor") - a.radius
    hi = Dyadic.sqrt(s2, work_bits, "ceil") + a.radius
    return (dmax(D0, lo), hi)


def ball_contains(a: Ball, p: ComplexDyadic) -> bool:
    """Exact membership test |p - center| <= radius."""
    d = p - a.center
    return d.abs2() <= a.radius * a.radius


@dataclass(frozen=True)
class DyInterval:
    """Closed real interval with exact dyadic endpoints."""

    lo: Dyadic
    hi: Dyadic

    def __post_init__(self):
        if self.lo > self.hi:
            raise InvalidConstants("interval endpoints out of order")

    @staticmethod
    def point(x: Dyadic) -> "DyInterval":
        return DyInterval(x, x)

    def width(self) -> Dyadic:
        return self.hi - self.lo

    def mid(self) -> Dyadic:
        return (self.lo + self.hi).scale2(-1)

    def mul_nonneg(self, other: "DyInterval") -> "DyInterval":
        """Exact product of two intervals with non-negative endpoints."""
        return DyInterval(self.lo * other.lo, self.hi * other.hi)

    def round_out(self, bits: int) -> "DyInterval":
        """Outward rounding to the 2**-bits grid."""
        return DyInterval(self.lo.round_frac(bits, "floor"), self.hi.round_frac(bits, "ceil"))

    def contains_value(self, x: Dyadic) -> bool:
        return self.lo <= x <= self.hi


class CoefficientOracle:
    """Precision-indexed approximation of a complex constant.

    ``query(bits)`` returns a ComplexDyadic within 2**-bits of the true
    value.  Querying at n bits is charged n ticks in the instrumentation
    counters; the cost model is recorded, not enforced.
    """

    __slots__ = ("_exact", "_num", "_den_log2", "queries", "ticks", "label")

    def __init__(self, exact: ComplexDyadic | None = None,
                 rational: tuple[int, int, int] | None = None,
                 label: str = ""):
        """Either an exact dyadic value, or a rational (p_re, p_im, q)
        meaning (p_re + i p_im) / q for a high-precision decimal source."""
        self._exact = exact
        if rational is not None:
            p_re, p_im, q = rational
            if q <= 0:
                raise InvalidConstants("rational oracle denominator must be positive")
            self._num = (p_re, p_im, q)
        else:
            self._num = None
        self._den_log2 = None
        self.queries = 0
        self.ticks = 0
        self.label = label
        if (exact is None) == (self._num is None):
            raise InvalidConstants("oracle needs exactly one of exact/rational source")

    @staticmethod
    def from_string(text: str, label: str = "") -> "CoefficientOracle":
        """Parse a coefficient: exact dyadic string, or decimal with a
        non-dyadic value (kept as an exact rational, truncated on demand)."""
        try:
            return CoefficientOracle(exact=ComplexDyadic(Dyadic.parse(text), D0), label=label)
        except ValueError:
            pass
        m = _DEC_RE.match(text)
        if not m:
            raise ValueError(f"cannot parse coefficient {text!r}")
        sign = -1 if m.group(1) == "-" else 1
        frac = m.group(3) or ""
        k = len(frac)
        num = sign * (int(m.group(2)) * 10**k + (int(frac) if frac else 0))
        return CoefficientOracle(rational=(num, 0, 10**k), label=label)

    def query(self, bits: int) -> ComplexDyadic:
        self.queries += 1
        self.ticks += max(1, bits)
        if self._exact is not None:
            return self._exact
        p_re, p_im, q = self._num
        # round p/q to bits+2 fractional places: error < 2^-(bits+1) < 2^-bits
        def rnd(p: int) -> Dyadic:
            num = p << (bits + 2)
            k = (2 * num + q) // (2 * q)
            return Dyadic(k, -(bits + 2))
        return ComplexDyadic(rnd(p_re), rnd(p_im))

    def exact_value(self) -> ComplexDyadic | None:
        return self._exact

    def __repr__(self) -> str:
        return f"CoefficientOracle({self.label or ('exact' if self._exact else 'rational')})"
