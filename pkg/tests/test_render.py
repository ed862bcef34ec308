import numpy as np
import pytest

from certjulia.bench import benchmark_scaling, near_set_points
from certjulia.dyadic import ComplexDyadic, Dyadic
from certjulia.errors import CertificateInvalid
from certjulia.oracles import exact_dist_circle
from certjulia.presets import circle_certificate, circle_map, segment_certificate, segment_map
from certjulia.render import (
    RenderRequest,
    read_pgm,
    render,
    render_dem,
    render_escape_time,
    snap_region,
    write_pgm,
)


def region(x0, y0, x1, y1):
    return tuple(Dyadic.from_float(float(v)) for v in (x0, y0, x1, y1))


@pytest.fixture(scope="module")
def circle():
    return circle_map(), circle_certificate()


SMALL = region(0.75, -0.25, 1.25, 0.25)


class TestSnapAndPgm:
    def test_snap_outward(self):
        gx0, gy0, gx1, gy1 = snap_region(region(-1.5, -1.5, 1.5, 1.5), 8)
        g = 1 << 10
        assert gx0 == -3 * g // 2 and gx1 == 3 * g // 2
        assert gy1 - gy0 == 3 * g

    def test_pgm_roundtrip(self, tmp_path):
        rng = np.random.default_rng(0)
        bm = rng.integers(0, 2, size=(37, 61)).astype(np.uint8)
        p = tmp_path / "x.pgm"
        write_pgm(p, bm)
        assert np.array_equal(read_pgm(p), bm)


class TestCertifiedRender:
    def test_small_window_contract(self, circle):
        f, cert = circle
        n = 8
        bitmap, stats = render(RenderRequest(
            map_spec=f, certificate=cert, region=SMALL, n=n))
        assert not stats.resolve.error_pixels
        gx0, gy0, gx1, gy1 = snap_region(SMALL, n)
        filled = np.argwhere(bitmap == 1)
        blank = np.argwhere(bitmap == 0)
        thr_fill = Dyadic(1, -(n + 2))
        thr_blank = Dyadic(1, -(n + 1))
        # filled pixels: exact distance strictly below 2^-(n+1)
        for r, c in filled[:: max(1, len(filled) // 200)]:
            z = ComplexDyadic(Dyadic(int(gx0 + c), -(n + 2)),
                              Dyadic(int(gy1 - 1 - r), -(n + 2)))
            lo, _ = exact_dist_circle(z)
            assert lo < thr_blank
        # blank pixels: exact distance strictly above 2^-(n+2)
        for r, c in blank[:: max(1, len(blank) // 400)]:
            z = ComplexDyadic(Dyadic(int(gx0 + c), -(n + 2)),
                              Dyadic(int(gy1 - 1 - r), -(n + 2)))
            _, hi = exact_dist_circle(z)
            assert hi > thr_fill

    def test_fill_band_present(self, circle):
        f, cert = circle
        bitmap, _ = render(RenderRequest(
            map_spec=f, certificate=cert, region=SMALL, n=8))
        assert bitmap.sum() > 50  # the circle crosses the window

    def test_thread_determinism(self, circle):
        f, cert = circle
        outs = []
        for threads in (1, 4, 8):
            bm, _ = render(RenderRequest(map_spec=f, certificate=cert,
                                         region=SMALL, n=8, threads=threads))
            outs.append(bm)
        assert np.array_equal(outs[0], outs[1])
        assert np.array_equal(outs[0], outs[2])

    def test_invalid_certificate_rejected(self, circle):
        f, cert = circle
        bad = cert.replaced(lam=Dyadic(1))
        with pytest.raises(CertificateInvalid):
            render(RenderRequest(map_spec=f, certificate=bad,
                                 region=SMALL, n=8))
        # override flag skips validation
        bad2 = cert.replaced(mu=Dyadic(1))  # fails range check only
        bm, _ = render(RenderRequest(map_spec=f, certificate=bad2,
                                     region=SMALL, n=8, allow_unvalidated=True))
        assert bm.shape[0] > 0

    def test_stats_conservation(self, circle):
        f, cert = circle
        _, stats = render(RenderRequest(map_spec=f, certificate=cert,
                                        region=SMALL, n=8))
        exits = sum(v for k, v in stats.resolve.reason_counts.items()
                    if k.startswith("ExitStep"))
        assert exits == int(stats.resolve.iter_hist.sum())
        assert stats.resolve.pixels == stats.width * stats.height

    def test_coarse_render(self, circle):
        f, cert = circle
        bm, stats = render(RenderRequest(map_spec=f, certificate=cert,
                                         region=region(-1.5, -1.5, 1.5, 1.5),
                                         n=4))
        assert stats.resolve.reason_counts.get("CoarseCover", 0) == bm.size
        assert bm.sum() > 0


class TestBaselines:
    def test_escape_band_covers_certified(self, circle):
        f, cert = circle
        n = 8
        cert_bm, _ = render(RenderRequest(map_spec=f, certificate=cert,
                                          region=SMALL, n=n))
        esc_bm, stats = render_escape_time(f, SMALL, n, max_iter=64)
        assert stats.uncertified
        # escape band contains every certified filled pixel
        assert int((cert_bm & ~esc_bm).sum()) == 0

    def test_dem_symmetric_difference_narrow(self, circle):
        f, cert = circle
        n = 8
        cert_bm, _ = render(RenderRequest(map_spec=f, certificate=cert,
                                          region=SMALL, n=n))
        dem_bm, _ = render_dem(f, SMALL, n, max_iter=64)
        diff = np.argwhere(cert_bm != dem_bm)
        gx0, gy0, gx1, gy1 = snap_region(SMALL, n)
        # every disagreeing pixel sits within a 2-pixel band of the circle
        for r, c in diff:
            z = ComplexDyadic(Dyadic(int(gx0 + c), -(n + 2)),
                              Dyadic(int(gy1 - 1 - r), -(n + 2)))
            lo, _ = exact_dist_circle(z)
            assert lo.to_float() <= 2 * 2.0 ** -(n + 1)

    def test_dem_interior_blank(self, circle):
        f, _ = circle
        bm, _ = render_dem(f, region(-0.25, -0.25, 0.25, 0.25), 6, max_iter=64)
        assert bm.sum() == 0  # deep interior: never escapes, marked blank


class TestBenchmark:
    def test_scaling_small(self, circle):
        f, cert = circle
        pts = near_set_points(cert, 40)
        rep = benchmark_scaling(f, cert, pts, [8, 10, 12], engine="exact")
        assert len(rep.rows) == 3
        for row in rep.rows:
            assert row.max_iterations <= row.iter_budget
        assert rep.fitted_exponent <= 3.0

    def test_csv(self, tmp_path, circle):
        f, cert = circle
        pts = near_set_points(cert, 10)
        rep = benchmark_scaling(f, cert, pts, [8, 10], csv_path=tmp_path / "b.csv")
        lines = (tmp_path / "b.csv").read_text().splitlines()
        assert lines[0].startswith("n,points")
        assert len(lines) == 3
