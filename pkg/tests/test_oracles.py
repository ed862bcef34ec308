import math
import random

import numpy as np
import pytest

from certjulia.dyadic import ComplexDyadic, Dyadic
from certjulia.errors import RootFindingFailure
from certjulia.oracles import (
    BackwardCloud,
    ConformanceReport,
    ConformanceRow,
    DistanceOracle,
    circle_oracle,
    conformance_check,
    exact_dist_circle,
    exact_dist_segment,
    inverse_iteration_cloud,
    segment_oracle,
)
from certjulia.presets import circle_certificate, circle_map, segment_certificate, segment_map


def cd(x, y=0.0):
    return ComplexDyadic(Dyadic.from_float(float(x)), Dyadic.from_float(float(y)))


class TestExactDistances:
    def test_circle_examples(self):
        lo, hi = exact_dist_circle(cd(0.0))
        assert lo == Dyadic(1) and hi == Dyadic(1)
        lo, hi = exact_dist_circle(cd(2.0))
        assert lo == Dyadic(1) and hi == Dyadic(1)
        # 3-4-5 point: on the circle up to float rounding of 0.6 and 0.8
        lo, hi = exact_dist_circle(cd(0.6, 0.8), bits=70)
        assert lo.to_float() < 1e-15 and hi.to_float() < 1e-15

    def test_segment_examples(self):
        lo, hi = exact_dist_segment(cd(3.0))
        assert lo == Dyadic(1) and hi == Dyadic(1)
        lo, hi = exact_dist_segment(cd(0.0, 1.0))
        assert lo == Dyadic(1) and hi == Dyadic(1)
        lo, hi = exact_dist_segment(cd(1.0))
        assert lo == Dyadic(0) and hi == Dyadic(0)

    def test_bracket_width_and_truth(self):
        rng = random.Random(3)
        for _ in range(1000):
            z = cd(rng.uniform(-3, 3), rng.uniform(-3, 3))
            for fn, true_fn in (
                (exact_dist_circle, lambda w: abs(math.hypot(w.re.to_float(), w.im.to_float()) - 1)),
                (exact_dist_segment, lambda w: math.hypot(max(abs(w.re.to_float()) - 2, 0), w.im.to_float()) if abs(w.re.to_float()) > 2 else abs(w.im.to_float())),
            ):
                lo, hi = fn(z, 64)
                assert (hi - lo) <= Dyadic(1, -62)
                t = true_fn(z)
                assert lo.to_float() <= t + 1e-12 and t - 1e-12 <= hi.to_float()


class TestInverseIteration:
    def test_circle_cloud(self):
        cloud = inverse_iteration_cloud(circle_map(), 30, cd(1.0), 2000)
        assert cloud.depth == 30
        r = np.abs(np.abs(cloud.points) - 1.0)
        assert float(r.max()) < 2**-20

    def test_segment_cloud(self):
        cloud = inverse_iteration_cloud(segment_map(), 20, cd(2.0), 2000)
        d = np.abs(cloud.points.imag)
        assert float(d.max()) < 2**-10
        assert float(np.abs(cloud.points.real).max()) <= 2.0 + 2**-10

    def test_depth_zero(self):
        cloud = inverse_iteration_cloud(circle_map(), 0, cd(1.0), 5)
        assert np.all(cloud.points == 1.0)


class TestConformance:
    def test_circle_small_run(self):
        f, cert = circle_map(), circle_certificate()
        rep = conformance_check(f, cert, circle_oracle(), [cert.n0, 10],
                                samples_per_n=800, seed=5)
        assert rep.total_violations == 0, rep.summary()
        strata = {(r.n, r.stratum): r for r in rep.rows}
        assert strata[(10, "close")].samples > 100
        assert strata[(10, "band")].band_occupancy == strata[(10, "band")].samples

    def test_segment_small_run(self):
        f, cert = segment_map(), segment_certificate()
        rep = conformance_check(f, cert, segment_oracle(), [cert.n0, 12],
                                samples_per_n=800, seed=6)
        assert rep.total_violations == 0, rep.summary()

    def test_corrupted_k2_detected(self):
        """Halving K2 beyond its safety margin must produce violations."""
        f, cert = circle_map(), circle_certificate()
        bad = cert.replaced(K2=Dyadic(1, -5))  # true exit products reach ~0.14
        rep = conformance_check(f, bad, circle_oracle(), [8, 10, 12],
                                samples_per_n=4000, seed=7)
        assert rep.total_violations >= 1

    def test_empty_samples(self):
        f, cert = circle_map(), circle_certificate()
        rep = conformance_check(f, cert, circle_oracle(), [], samples_per_n=0)
        assert rep.total_violations == 0 and rep.rows == []

    def test_csv_roundtrip(self, tmp_path):
        rep = ConformanceReport("circle", [ConformanceRow(8, "close", 10, 0, 0)])
        p = tmp_path / "r.csv"
        rep.write_csv(p)
        text = p.read_text().splitlines()
        assert text[0].startswith("n,stratum")
        assert text[1] == "8,close,10,0,0"

    def test_synthetic_oracle_flags_constructed_violations(self):
        """Harness symmetry: with a synthetic oracle whose distance is
        астronomically large everywhere, every verdict-0 sample is a
        violation, and with distance 0 every verdict-1 sample is."""
        f, cert = circle_map(), circle_certificate()

        def dist_far(z, bits=64):
            return Dyadic(1 << 10), Dyadic(1 << 10)

        def dist_zero(z, bits=64):
            return Dyadic(0), Dyadic(0)

        def sampler(rng, dists):
            ang = rng.uniform(0, 2 * np.pi, dists.shape[0])
            return (1.0 + dists) * np.exp(1j * ang)

        far_oracle = DistanceOracle("synthetic-far", dist_far, sampler)
        rep = conformance_check(f, cert, far_oracle, [10], samples_per_n=300)
        zero_count = sum(r.samples for r in rep.rows)
        # every sample that answered 0 must be flagged
        assert rep.total_violations > 0
        zero_oracle = DistanceOracle("synthetic-zero", dist_zero, sampler)
        rep2 = conformance_check(f, cert, zero_oracle, [10], samples_per_n=300)
        assert rep2.total_violations > 0
        assert zero_count == 300
