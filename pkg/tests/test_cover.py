import numpy as np
import pytest

from certjulia.cover import (
    BoxCover,
    build_cover_inverse_iteration,
    contains,
    dist_lower,
    inflate,
    validate_Ucond,
)
from certjulia.dyadic import ComplexDyadic, Dyadic
from certjulia.errors import PointInsideCover
from certjulia.maps import MapSpec


def cd(x_num, x_den_log2, y_num=0, y_den_log2=0):
    return ComplexDyadic(Dyadic(x_num, -x_den_log2), Dyadic(y_num, -y_den_log2))


def unit_box(m=0):
    return BoxCover(m, np.array([[0, 0]]))


class TestContains:
    def test_interior(self):
        assert contains(unit_box(), cd(1, 1, 1, 1))

    def test_closed_boundary_corner(self):
        assert contains(unit_box(), cd(1, 0, 1, 0))
        assert contains(unit_box(), cd(0, 0, 0, 0))

    def test_exterior(self):
        assert not contains(unit_box(), cd(2, 0))
        assert not contains(unit_box(), cd(-1, 3))

    def test_shared_edge_counts_for_both(self):
        c = BoxCover(2, np.array([[1, 1]]))
        # x exactly on the left edge of box 1 at m=2: x=1/4
        assert contains(c, cd(1, 2, 3, 3))


class TestDistLower:
    def test_axis_distance(self):
        d = dist_lower(unit_box(), cd(3, 0))
        assert Dyadic(2) - Dyadic(1, -4) <= d <= Dyadic(2)

    def test_corner_distance(self):
        d = dist_lower(unit_box(), cd(2, 0, 2, 0))
        rt2 = Dyadic.sqrt(Dyadic(2), 30, "floor")
        assert abs((d - rt2).to_float()) < 2**-4

    def test_grid_line_adjacent(self):
        m = 5
        c = BoxCover(m, np.array([[0, 0]]))
        z = ComplexDyadic(Dyadic(-1, -m), Dyadic(1, -m - 1))
        d = dist_lower(c, z)
        assert Dyadic(1, -m) - Dyadic(1, -m - 4) <= d <= Dyadic(1, -m)

    def test_inside_raises(self):
        with pytest.raises(PointInsideCover):
            dist_lower(unit_box(), cd(1, 1, 1, 1))

    def test_consistency_with_contains(self):
        rng = np.random.default_rng(3)
        c = BoxCover(3, rng.integers(-6, 6, size=(30, 2)))
        for _ in range(300):
            z = ComplexDyadic(Dyadic(int(rng.integers(-2**12, 2**12)), -9),
                              Dyadic(int(rng.integers(-2**12, 2**12)), -9))
            if contains(c, z):
                with pytest.raises(PointInsideCover):
                    dist_lower(c, z)
            else:
                assert dist_lower(c, z).m >= 0


class TestInflate:
    def test_identity(self):
        c = unit_box(4)
        assert inflate(c, Dyadic(0)) == c

    def test_single_box_becomes_3x3(self):
        c = unit_box(4)
        out = inflate(c, Dyadic(1, -4))
        assert out.n_boxes == 9
        assert set(map(tuple, out.boxes)) == {(i, j) for i in (-1, 0, 1) for j in (-1, 0, 1)}

    def test_monotone(self):
        rng = np.random.default_rng(11)
        c = BoxCover(5, rng.integers(-8, 8, size=(12, 2)))
        out = inflate(c, Dyadic(3, -5))
        assert set(map(tuple, c.boxes)) <= set(map(tuple, out.boxes))

    def test_composition_contains_sum(self):
        c = BoxCover(5, np.array([[0, 0], [4, 2]]))
        t, s = Dyadic(1, -5), Dyadic(2, -5)
        two_step = inflate(inflate(c, t), s)
        one_step = inflate(c, t + s)
        assert set(map(tuple, one_step.boxes)) <= set(map(tuple, two_step.boxes))


class TestFileRoundTrip:
    def test_roundtrip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(7)
        c = BoxCover(9, rng.integers(-300, 300, size=(500, 2)))
        p = tmp_path / "c.cover"
        c.save(p)
        c2 = BoxCover.load(p)
        assert c2 == c
        assert c2.to_text() == c.to_text()


class TestInverseIterationCover:
    def test_depth_zero_single_box(self):
        f = MapSpec.quadratic(ComplexDyadic.from_ints(0))
        c = build_cover_inverse_iteration(f, 0, 6, cd(1, 0))
        # seed on a grid corner belongs to all four adjacent closed boxes
        assert c.n_boxes <= 4
        assert contains(c, cd(1, 0))
        off_grid = build_cover_inverse_iteration(
            f, 0, 6, ComplexDyadic(Dyadic(3, -7), Dyadic(1, -7)))
        assert off_grid.n_boxes == 1

    def test_circle_cover(self):
        f = MapSpec.quadratic(ComplexDyadic.from_ints(0))
        c = build_cover_inverse_iteration(f, 10, 6, cd(1, 0))
        centers = c.box_centers()
        radii = np.hypot(centers[:, 0], centers[:, 1])
        assert np.all(np.abs(radii - 1.0) < 2**-4)

    def test_segment_cover(self):
        f = MapSpec.quadratic(ComplexDyadic.from_ints(-2))
        c = build_cover_inverse_iteration(f, 12, 6, cd(2, 0))
        centers = c.box_centers()
        assert np.all(np.abs(centers[:, 1]) < 2**-4)
        assert np.all(np.abs(centers[:, 0]) < 2 + 2**-4)
        # Hausdorff: every x in [-2,2] is near some box center
        xs = np.linspace(-2, 2, 400)
        mind = np.min(np.abs(xs[:, None] - centers[None, :, 0]), axis=1)
        assert np.max(mind) < 2**-4


class TestValidateUcond:
    def _circle_setup(self, m=8):
        f = MapSpec.quadratic(ComplexDyadic.from_ints(0))
        japprox = build_cover_inverse_iteration(f, 13, m, cd(1, 0))
        japprox = inflate(japprox, Dyadic(1, -m))
        return f, japprox

    def test_annulus_passes(self):
        m = 8
        f, japprox = self._circle_setup(m)
        eps = Dyadic(1, -6)
        r = Dyadic(9, -5)  # 9/32
        U = inflate(japprox, eps.scale2(1) + Dyadic(2, -m))
        rep = validate_Ucond(f, U, japprox, eps, r)
        assert rep.overall, str(rep)

    def test_eps_too_large_fails(self):
        m = 8
        f, japprox = self._circle_setup(m)
        U = inflate(japprox, Dyadic(1, -m))
        rep = validate_Ucond(f, U, japprox, Dyadic(1, -3), Dyadic(9, -5))
        assert not rep.overall
        assert any(not ok for name, ok, _ in rep.checks if name == "julia-2eps-inside-U")
