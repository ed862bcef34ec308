import numpy as np
import pytest

from certjulia.cover import BoxCover
from certjulia.dyadic import (
    Ball,
    CoefficientOracle,
    ComplexDyadic,
    Dyadic,
    ball_abs_bounds,
    ball_contains,
)
from certjulia.errors import DenominatorVanishes, InvalidConstants
from certjulia.maps import (
    MapSpec,
    eval_df,
    eval_f,
    orbit_with_derivative,
    preimages_complex,
    sup_df_on_cover,
)


def zsq():
    return MapSpec.quadratic(ComplexDyadic.from_ints(0))


def cheb():
    return MapSpec.quadratic(ComplexDyadic.from_ints(-2))


def point(x, y=0):
    return Ball.point(ComplexDyadic.from_complex(complex(x, y)))


class TestEval:
    def test_square_fixed_point(self):
        out = eval_f(zsq(), point(1), 53)
        assert ball_contains(out, ComplexDyadic.from_ints(1))
        d = eval_df(zsq(), point(1), 53)
        assert ball_contains(d, ComplexDyadic.from_ints(2))

    def test_cheb_fixed_point(self):
        out = eval_f(cheb(), point(2), 53)
        assert ball_contains(out, ComplexDyadic.from_ints(2))

    def test_z2_plus_i(self):
        f = MapSpec.quadratic(ComplexDyadic(Dyadic(0), Dyadic(1)))
        out = eval_f(f, point(0), 53)
        assert ball_contains(out, ComplexDyadic(Dyadic(0), Dyadic(1)))
        assert out.radius <= Dyadic(1, -50)

    def test_rational_map(self):
        # f(z) = (z^2 + 1) / z, f(1) = 2, f'(z) = 1 - 1/z^2 so f'(1) = 0
        one = ComplexDyadic.from_ints(1)
        zero = ComplexDyadic.from_ints(0)
        f = MapSpec("rational", 2,
                    [CoefficientOracle(exact=one), CoefficientOracle(exact=zero),
                     CoefficientOracle(exact=one)],
                    [CoefficientOracle(exact=zero), CoefficientOracle(exact=one)])
        out = eval_f(f, point(1), 60)
        assert ball_contains(out, ComplexDyadic.from_ints(2))
        d = eval_df(f, point(1), 60)
        assert ball_contains(d, ComplexDyadic.from_ints(0))

    def test_denominator_vanishes(self):
        one = ComplexDyadic.from_ints(1)
        zero = ComplexDyadic.from_ints(0)
        f = MapSpec("rational", 2,
                    [CoefficientOracle(exact=one), CoefficientOracle(exact=zero),
                     CoefficientOracle(exact=one)],
                    [CoefficientOracle(exact=zero), CoefficientOracle(exact=one)])
        with pytest.raises(DenominatorVanishes):
            eval_f(f, point(0), 60)

    def test_degree_check(self):
        with pytest.raises(InvalidConstants):
            MapSpec.polynomial_from_strings(["0", "1"])


class TestOrbit:
    def test_cheb_fixed_point_derivatives(self):
        pts = orbit_with_derivative(cheb(), ComplexDyadic.from_ints(2), 3,
                                    Dyadic(1, -20), Dyadic(6))
        assert len(pts) == 3
        for i, op in enumerate(pts, start=1):
            assert ball_contains(op.p, ComplexDyadic.from_ints(2))
            assert op.d.contains_value(Dyadic(4**i))
            assert op.p.radius <= Dyadic(1, -20)
            assert op.d.width() <= Dyadic(1, -20)

    def test_square_chain_rule(self):
        pts = orbit_with_derivative(zsq(), ComplexDyadic.from_ints(1), 5,
                                    Dyadic(1, -20), Dyadic(4))
        for i, op in enumerate(pts, start=1):
            assert op.d.contains_value(Dyadic(2**i))

    def test_critical_orbit(self):
        pts = orbit_with_derivative(cheb(), ComplexDyadic.from_ints(0), 3,
                                    Dyadic(1, -20), Dyadic(6))
        expect = [(-2, 0), (2, 0), (2, 0)]
        for op, (ex, _) in zip(pts, expect):
            assert ball_contains(op.p, ComplexDyadic.from_ints(ex))
            assert op.d.contains_value(Dyadic(0)) or op.d.lo <= Dyadic(1, -18)

    def test_chain_rule_consistency(self):
        f = MapSpec.quadratic(ComplexDyadic(Dyadic(1, -2), Dyadic(1, -3)))
        z = ComplexDyadic(Dyadic(1, -1), Dyadic(1, -2))
        pts = orbit_with_derivative(f, z, 6, Dyadic(1, -24), Dyadic(8))
        for prev, cur in zip(pts, pts[1:]):
            dfb = eval_df(f, prev.p, 80)
            lo, hi = ball_abs_bounds(dfb, 80)
            plo = prev.d.lo * lo
            phi = prev.d.hi * hi
            assert plo <= cur.d.hi and cur.d.lo <= phi


class TestSupDf:
    def _annulus_cover(self, m=6):
        boxes = []
        for ix in range(-(3 << m) // 2, (3 << m) // 2):
            for iy in range(-(3 << m) // 2, (3 << m) // 2):
                cx = (ix + 0.5) * 2.0**-m
                cy = (iy + 0.5) * 2.0**-m
                rr = np.hypot(cx, cy)
                if 0.5 <= rr <= 1.5:
                    boxes.append((ix, iy))
        return BoxCover(m, np.array(boxes))

    def test_annulus_sup(self):
        r_hat = sup_df_on_cover(zsq(), self._annulus_cover(), Dyadic(0))
        assert Dyadic(3) <= r_hat <= Dyadic(4)

    def test_segment_sup(self):
        boxes = [(ix, -1) for ix in range(-2 << 4, 2 << 4)]
        boxes += [(ix, 0) for ix in range(-2 << 4, 2 << 4)]
        c = BoxCover(4, np.array(boxes))
        r_hat = sup_df_on_cover(cheb(), c, Dyadic(1, -2))
        assert r_hat >= Dyadic(9, -1)  # 2 * (2 + 1/4) = 4.5

    def test_single_point_box(self):
        c = BoxCover(6, np.array([[63, -1], [63, 0], [64, -1], [64, 0]]))
        # boxes around z = 1: |f'| = 2|z| close to 2
        r_hat = sup_df_on_cover(zsq(), c, Dyadic(0), split=3)
        assert Dyadic(2) <= r_hat <= Dyadic(2) + Dyadic(1, -3)


class TestPreimages:
    def test_quadratic_preimages(self):
        roots = preimages_complex(zsq(), np.array([1.0 + 0j]))
        assert sorted(np.round(roots.real, 9).tolist()) == [-1.0, 1.0]

    def test_json_roundtrip(self, tmp_path):
        f = MapSpec.polynomial_from_strings(["-2", "0", "1"])
        p = tmp_path / "map.json"
        f.save(p)
        g = MapSpec.load(p)
        assert g.kind == f.kind and g.degree == f.degree
        assert g.num[0].exact_value() == f.num[0].exact_value()

    def test_decimal_oracle_map(self):
        f = MapSpec.polynomial_from_strings(["0.333333333333333333333", "0", "1"])
        v = f.num[0].query(40)
        assert abs(v.re.to_float() - 1 / 3) < 2**-40
        nre, nim, nrad, *_ = f.float_view()
        assert nrad[0] > 0  # inexact coefficient carries a radius
