import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from certjulia.dyadic import (
    Ball,
    ComplexDyadic,
    CoefficientOracle,
    Dyadic,
    DyInterval,
    ball_abs_bounds,
    ball_add,
    ball_contains,
    ball_mul,
    round_ball,
)

D = Dyadic


def dy(num, log2den=0):
    return Dyadic(num, -log2den)


class TestDyadicBasics:
    def test_canonical_form(self):
        assert Dyadic(12, 0).m == 3 and Dyadic(12, 0).e == 2
        assert Dyadic(0, 99).m == 0 and Dyadic(0, 99).e == 0
        assert Dyadic(-8, -3).m == -1 and Dyadic(-8, -3).e == 0

    def test_exact_arithmetic(self):
        a = dy(3, 3)   # 3/8
        b = dy(5, 1)   # 5/2
        assert (a + b) == dy(23, 3)
        assert (a * b) == dy(15, 4)
        assert (b - a) == dy(17, 3)

    def test_comparisons(self):
        assert dy(1, 1) < dy(3, 2) < dy(1, 0)
        assert dy(-3, 1) < dy(0) < dy(1, 4)

    def test_round_frac_directed(self):
        x = dy(5, 3)  # 0.625
        assert x.round_frac(1, "floor") == dy(1, 1)
        assert x.round_frac(1, "ceil") == dy(2, 1)
        assert x.round_frac(3) == x  # exact stays exact
        y = dy(-5, 3)
        assert y.round_frac(1, "floor") == dy(-2, 1)
        assert y.round_frac(1, "ceil") == dy(-1, 1)

    def test_div_directed(self):
        q_floor = Dyadic.div(D(1), D(3), 8, "floor")
        q_ceil = Dyadic.div(D(1), D(3), 8, "ceil")
        assert q_floor < q_ceil
        assert (q_ceil - q_floor) == Dyadic(1, -8)
        assert q_floor.to_float() < 1 / 3 < q_ceil.to_float()
        # negative denominator flips correctly
        q = Dyadic.div(D(1), D(-3), 8, "floor")
        assert q.to_float() < -1 / 3 + 2**-8

    def test_sqrt_directed(self):
        lo = Dyadic.sqrt(D(2), 30, "floor")
        hi = Dyadic.sqrt(D(2), 30, "ceil")
        assert lo <= hi
        assert (lo * lo) <= D(2) <= (hi * hi)
        assert (hi - lo) <= Dyadic(2, -30)
        assert Dyadic.sqrt(D(25), 10, "floor") == D(5)
        assert Dyadic.sqrt(D(25), 10, "ceil") == D(5)

    def test_floor_ceil_log2(self):
        assert dy(1, 3).floor_log2() == -3
        assert dy(1, 3).ceil_log2() == -3
        assert dy(3, 0).floor_log2() == 1
        assert dy(3, 0).ceil_log2() == 2


class TestSerialization:
    @given(st.integers(-2**80, 2**80), st.integers(-90, 90))
    @settings(max_examples=300, deadline=None)
    def test_roundtrip_both_formats(self, m, e):
        x = Dyadic(m, e)
        assert Dyadic.parse(x.to_pow2_string()) == x
        assert Dyadic.parse(x.to_decimal_string()) == x

    def test_decimal_exact(self):
        assert dy(13, 2).to_decimal_string() == "3.25"
        assert dy(-1, 5).to_decimal_string() == "-0.03125"
        assert Dyadic(6) .to_decimal_string() == "6"

    def test_parse_rejects_non_dyadic(self):
        with pytest.raises(ValueError):
            Dyadic.parse("0.1")

    def test_exactness_through_strings(self):
        # add/mul of canonical values round-trips bit-exactly
        rng = random.Random(7)
        for _ in range(200):
            a = Dyadic(rng.randint(-2**40, 2**40), rng.randint(-40, 10))
            b = Dyadic(rng.randint(-2**40, 2**40), rng.randint(-40, 10))
            for x in (a + b, a * b):
                assert Dyadic.parse(x.to_decimal_string()) == x
                assert Dyadic.parse(x.to_pow2_string()) == x


class TestFloatInterop:
    @given(st.floats(-1e12, 1e12, allow_nan=False, allow_infinity=False))
    @settings(max_examples=300, deadline=None)
    def test_from_float_exact(self, x):
        assert Dyadic.from_float(x).to_float() == x

    def test_to_float_directed(self):
        x = Dyadic((1 << 60) + 1, -60)  # just above 1, not float-exact
        assert x.to_float("floor") < x.to_float("ceil")
        assert Dyadic.from_float(x.to_float("floor")) <= x
        assert x <= Dyadic.from_float(x.to_float("ceil"))

    def test_is_float_exact(self):
        assert dy(3, 2).is_float_exact()
        assert not Dyadic((1 << 60) + 1, -60).is_float_exact()


def random_ball(rng, scale=4):
    c = ComplexDyadic(
        Dyadic(rng.randint(-2**20, 2**20), -18),
        Dyadic(rng.randint(-2**20, 2**20), -18),
    )
    r = Dyadic(rng.randint(0, 2**12), -14)
    return Ball(c, r)


def random_point_in(ball, rng):
    """Exact dyadic point inside the ball (checked exactly)."""
    for _ in range(64):
        dx = Dyadic(rng.randint(-2**16, 2**16), -16) * ball.radius
        dy_ = Dyadic(rng.randint(-2**16, 2**16), -16) * ball.radius
        p = ball.center + ComplexDyadic(dx, dy_)
        if ball_contains(ball, p):
            return p
    return ball.center


class TestBallOps:
    def test_mul_scaling_example(self):
        # disk around 1 with radius 1/8 scaled by exact 2
        a = Ball(ComplexDyadic.from_ints(1), dy(1, 3))
        b = Ball(ComplexDyadic.from_ints(2))
        out = ball_mul(a, b, 53)
        assert out.center == ComplexDyadic.from_ints(2)
        assert out.radius >= dy(1, 2)

    def test_mul_zero_absorbs(self):
        a = Ball(ComplexDyadic.from_ints(0))
        b = Ball(ComplexDyadic(dy(7, 1), dy(-3, 2)), dy(1, 1))
        out = ball_mul(a, b, 53)
        assert out.center == ComplexDyadic.from_ints(0)
        assert out.radius.m >= 0

    def test_mul_montecarlo_containment(self):
        rng = random.Random(123)
        for _ in range(400):
            a, b = random_ball(rng), random_ball(rng)
            out = ball_mul(a, b, 48)
            for _ in range(25):
                x = random_point_in(a, rng)
                y = random_point_in(b, rng)
                assert ball_contains(out, x * y)

    def test_add_containment(self):
        rng = random.Random(5)
        for _ in range(300):
            a, b = random_ball(rng), random_ball(rng)
            out = ball_add(a, b, 48)
            for _ in range(20):
                x = random_point_in(a, rng)
                y = random_point_in(b, rng)
                assert ball_contains(out, x + y)

    def test_abs_bounds(self):
        fives = Ball(ComplexDyadic.from_ints(3, 4))
        lo, hi = ball_abs_bounds(fives, 53)
        assert lo <= D(5) <= hi
        assert (hi - lo) <= Dyadic(1, -50)
        origin = Ball(ComplexDyadic.from_ints(0), D(1))
        lo, hi = ball_abs_bounds(origin)
        assert lo == D(0) and hi >= D(1)
        z = Ball(ComplexDyadic.from_ints(1, 1), dy(1, 2))
        lo, hi = ball_abs_bounds(z, 60)
        rt2 = math.sqrt(2)
        assert lo.to_float() <= rt2 - 0.25 and hi.to_float() >= rt2 + 0.25

    def test_round_ball(self):
        exact = Ball(ComplexDyadic(dy(3, 2), dy(1, 1)), dy(1, 4))
        assert round_ball(exact, 8).radius == exact.radius  # identity case
        third = Dyadic.div(D(1), D(3), 64, "nearest")
        b = Ball(ComplexDyadic(third, D(0)))
        out = round_ball(b, 8)
        assert out.radius <= Dyadic(1, -8)
        assert out.center.re.frac_bits() <= 8

    def test_repeated_round_containment(self):
        rng = random.Random(17)
        for _ in range(200):
            a = random_ball(rng)
            b = round_ball(round_ball(a, 16), 8)
            for _ in range(10):
                p = random_point_in(a, rng)
                assert ball_contains(b, p)

    def test_radius_monotone_in_work_bits(self):
        rng = random.Random(29)
        for _ in range(100):
            a, b = random_ball(rng), random_ball(rng)
            r_low = ball_mul(a, b, 24).radius
            r_high = ball_mul(a, b, 48).radius
            # more working precision never costs more than the lower-precision radius
            assert r_high <= r_low + r_low


class TestDyInterval:
    def test_mul_and_round(self):
        a = DyInterval(dy(1, 1), dy(3, 1))
        b = DyInterval(dy(1, 2), dy(5, 2))
        p = a.mul_nonneg(b)
        assert p.lo == dy(1, 3) and p.hi == dy(15, 3)
        r = p.round_out(1)
        assert r.lo <= p.lo and r.hi >= p.hi


class TestCoefficientOracle:
    def test_exact_source(self):
        c = CoefficientOracle(exact=ComplexDyadic(dy(-2), dy(0)))
        v = c.query(40)
        assert v.re == dy(-2)
        assert c.queries == 1 and c.ticks == 40

    def test_rational_source_accuracy(self):
        # 1/3 is not dyadic: check |query(n) - 1/3| < 2^-n over a range
        c = CoefficientOracle(rational=(1, 0, 3))
        for n in (4, 10, 30, 64):
            v = c.query(n)
            err = abs(v.re.to_float() - 1 / 3)
            assert err < 2**-n

    def test_from_string(self):
        c = CoefficientOracle.from_string("-2")
        assert c.exact_value().re == dy(-2)
        c2 = CoefficientOracle.from_string("0.333333333333333333333333")
        assert c2.exact_value() is None
        assert abs(c2.query(50).re.to_float() - 1 / 3) < 2**-50
