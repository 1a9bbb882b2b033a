import math

import numpy as np
import pytest
from scipy import integrate, stats

from cheaptalk.errors import BinDeathError
from cheaptalk.geometry import Hyperplane
from cheaptalk.sources import (
    EstimateWithError,
    Region,
    conditional_mean_curve,
    conditional_support,
    correlated_gaussian_2d,
    iid_exponential,
    iid_gaussian,
    iid_laplace,
    iid_uniform,
    pair_coordinate_interval,
    region_mean,
    symmetry_deviation,
    tabulated_density,
    tabulated_from_csv,
    truncated_mean_1d,
    truncated_moments_1d,
)

HALF_NORMAL_MEAN = math.sqrt(2.0 / math.pi)  # E[Z | Z > 0] for a standard normal


class TestSampling:
    def test_deterministic_given_seed(self):
        g = iid_gaussian(2)
        a = g.sample(5000, seed=11)
        b = g.sample(5000, seed=11)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, g.sample(5000, seed=12))

    def test_prefix_property(self):
        # shorter requests are exact prefixes: chunked substreams keyed by
        # (seed, chunk) make results independent of how work is split
        for model in (iid_gaussian(2), iid_uniform(3), iid_exponential(1), iid_laplace(2)):
            long = model.sample(70_000, seed=3)
            short = model.sample(1_000, seed=3)
            assert np.array_equal(long[:1_000], short)

    def test_uniform_moments(self):
        pts = iid_uniform(2).sample(1_000_000, seed=0)
        tol = 3.0 * (1.0 / math.sqrt(12.0)) / 1e3
        assert np.all(np.abs(pts.mean(axis=0) - 0.5) < tol)

    def test_exponential_mean(self):
        pts = iid_exponential(1, rate=1.0).sample(400_000, seed=1)
        se = pts.std() / math.sqrt(pts.shape[0])
        assert abs(pts.mean() - 1.0) < 3.0 * se

    def test_gaussian_moments(self):
        pts = iid_gaussian(1, mean=2.0, sigma_sq=4.0).sample(400_000, seed=2)
        assert abs(pts.mean() - 2.0) < 3.0 * 2.0 / math.sqrt(400_000)
        assert abs(pts.var() - 4.0) < 0.05

    def test_correlated_gaussian_covariance(self):
        model = correlated_gaussian_2d(1.0, 2.0, 0.8)
        pts = model.sample(400_000, seed=3)
        cov = np.cov(pts.T)
        assert np.allclose(cov, [[1.0, 0.8], [0.8, 2.0]], atol=0.03)

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            iid_gaussian(2).sample(0, seed=1)
        with pytest.raises(ValueError):
            iid_gaussian(2, sigma_sq=-1.0)
        with pytest.raises(ValueError):
            correlated_gaussian_2d(1.0, 1.0, 1.5)


class TestTruncatedMoments:
    def test_gaussian_against_scipy(self):
        model = iid_gaussian(1, mean=0.7, sigma_sq=2.25)
        for a, b in [(-1.0, 1.0), (0.0, math.inf), (-math.inf, 0.3), (2.0, 5.0)]:
            mass, mean, second = truncated_moments_1d(model, a, b)
            ref = stats.truncnorm((a - 0.7) / 1.5, (b - 0.7) / 1.5, loc=0.7, scale=1.5)
            assert mean == pytest.approx(ref.mean(), rel=1e-9)
            assert second == pytest.approx(ref.moment(2), rel=1e-8)

    def test_half_normal(self):
        assert truncated_mean_1d(iid_gaussian(1), 0.0, math.inf) == pytest.approx(
            HALF_NORMAL_MEAN, rel=1e-12
        )

    @pytest.mark.parametrize(
        "model",
        [iid_exponential(1, rate=1.7), iid_laplace(1, mean=0.4, scale=0.9)],
    )
    def test_against_quadrature(self, model):
        pdf = lambda x: model.marginal_pdf(0, np.array([x]))[0]
        for a, b in [(0.1, 1.3), (-2.0, 0.5), (0.9, math.inf)]:
            hi = b if math.isfinite(b) else model.marginal_ppf(0, 1.0 - 1e-12)
            mass_q, _ = integrate.quad(pdf, a, hi, limit=200)
            mean_q, _ = integrate.quad(lambda x: x * pdf(x), a, hi, limit=200)
            sec_q, _ = integrate.quad(lambda x: x * x * pdf(x), a, hi, limit=200)
            mass, mean, second = truncated_moments_1d(model, a, b)
            assert mass == pytest.approx(mass_q, rel=1e-8, abs=1e-12)
            if mass > 0:
                assert mean == pytest.approx(mean_q / mass_q, rel=1e-7)
                assert second == pytest.approx(sec_q / mass_q, rel=1e-7)

    def test_empty_interval(self):
        with pytest.raises(BinDeathError):
            truncated_mean_1d(iid_uniform(1), 2.0, 3.0)


class TestRegionMean:
    def test_uniform_half_box(self):
        region = Region.from_halfspaces([Hyperplane(normal=[-1.0, 0.0], anchor=[0.5, 0.0])])
        est = region_mean(iid_uniform(2), region)
        assert est.stderr == 0.0  # quadrature path
        assert np.allclose(est.value, [0.25, 0.5], atol=1e-6)

    def test_gaussian_half_line(self):
        region = Region.from_halfspaces([Hyperplane(normal=[1.0], anchor=[0.0])])
        quad = region_mean(iid_gaussian(1), region)
        assert np.asarray(quad.value)[0] == pytest.approx(HALF_NORMAL_MEAN, abs=5e-4)
        mc = region_mean(iid_gaussian(1), region, method="mc", samples=400_000, seed=4)
        assert abs(np.asarray(mc.value)[0] - HALF_NORMAL_MEAN) < 3.0 * mc.stderr

    def test_full_support_gives_mean(self):
        region = Region.from_indicator(lambda pts: np.ones(pts.shape[0], dtype=bool))
        est = region_mean(iid_exponential(2, rate=2.0), region)
        assert np.allclose(est.value, [0.5, 0.5], atol=2e-4)

    def test_quadrature_and_mc_agree(self):
        rng = np.random.default_rng(6)
        for model in (iid_gaussian(2), iid_uniform(2)):
            for _ in range(3):
                normal = rng.normal(size=2)
                anchor = model.mean_vector + rng.normal(size=2, scale=0.3)
                region = Region.from_halfspaces([Hyperplane(normal=normal, anchor=anchor)])
                quad = region_mean(model, region)
                mc = region_mean(model, region, method="mc", samples=200_000, seed=7)
                err = np.linalg.norm(np.asarray(quad.value) - np.asarray(mc.value))
                assert err < 3.0 * mc.stderr + 1e-3

    def test_centroid_interior_to_convex_region(self):
        rng = np.random.default_rng(8)
        model = iid_gaussian(2)
        for _ in range(10):
            planes = [
                Hyperplane(normal=rng.normal(size=2), anchor=rng.normal(size=2, scale=0.4))
                for _ in range(2)
            ]
            region = Region.from_halfspaces(planes)
            try:
                est = region_mean(model, region)
            except BinDeathError:
                continue
            for plane in planes:
                assert plane.value(np.asarray(est.value)) > 0.0

    def test_negligible_region_is_bin_death(self):
        region = Region.from_halfspaces([Hyperplane(normal=[1.0], anchor=[20.0])])
        with pytest.raises(BinDeathError):
            region_mean(iid_gaussian(1), region)

    def test_sample_mask_region(self):
        pts = iid_uniform(2).sample(50_000, seed=9)
        mask = pts[:, 0] <= 0.5
        est = region_mean(iid_uniform(2), Region.from_samples(pts, mask))
        assert np.allclose(est.value, [0.25, 0.5], atol=4 * est.stderr + 1e-3)
        assert est.sample_count == int(mask.sum())


class TestConditionalMeanCurve:
    def test_gaussian_flat(self):
        grid = np.linspace(-2.0, 2.0, 9)
        curve = conditional_mean_curve(iid_gaussian(2), [1.0, 2.0], grid, samples=400_000, seed=10)
        for est in curve:
            assert abs(float(np.asarray(est.value))) < 3.0 * est.stderr

    def test_exponential_memorylessness_oracle(self):
        # E[M1 + M2 | M2 - M1 = t] = |t| + 1 for unit-rate exponentials:
        # conditionally on the difference, the smaller coordinate is Exp(2)
        model = iid_exponential(2, rate=1.0)
        grid = np.array([-2.0, -0.7, 0.0, 0.7, 2.0])
        curve = conditional_mean_curve(model, [1.0, 1.0], grid, samples=1_000_000, seed=11)
        for t, est in zip(grid, curve):
            oracle = abs(t) + 1.0 - 2.0
            assert float(np.asarray(est.value)) == pytest.approx(oracle, abs=5 * est.stderr + 5e-3)

    def test_exponential_oracle_against_quadrature(self):
        # independent check of the |t|+1 rule by direct 2-D integration over
        # a band around the slice
        t, delta = 0.7, 0.01
        joint = lambda m1, m2: math.exp(-m1 - m2)
        num, _ = integrate.dblquad(
            lambda m2, m1: (m1 + m2) * joint(m1, m2),
            0.0, 40.0, lambda m1: max(m1 + t - delta, 0.0), lambda m1: m1 + t + delta,
        )
        den, _ = integrate.dblquad(
            lambda m2, m1: joint(m1, m2),
            0.0, 40.0, lambda m1: max(m1 + t - delta, 0.0), lambda m1: m1 + t + delta,
        )
        assert num / den == pytest.approx(abs(t) + 1.0, abs=1e-3)

    @pytest.mark.parametrize(
        "model",
        [
            iid_gaussian(2),
            iid_uniform(2),
            iid_exponential(2, rate=0.8),
            iid_laplace(2, scale=1.3),
        ],
    )
    def test_antisymmetric_bias_flat_for_all_families(self, model):
        lo, hi = pair_coordinate_interval(model, [1.0, -1.0], 0)
        pad = 0.15 * (hi - lo)
        grid = np.linspace(lo + pad, hi - pad, 7)
        curve = conditional_mean_curve(model, [1.0, -1.0], grid, samples=400_000, seed=12)
        for est in curve:
            assert abs(float(np.asarray(est.value))) < 3.0 * est.stderr + 1e-4

    def test_uniform_symmetric_flat(self):
        grid = np.linspace(-0.6, 0.6, 7)
        curve = conditional_mean_curve(iid_uniform(2), [1.0, 1.0], grid, samples=400_000, seed=13)
        for est in curve:
            assert abs(float(np.asarray(est.value))) < 3.0 * est.stderr + 1e-4

    def test_grid_outside_support_rejected(self):
        with pytest.raises(ValueError):
            conditional_mean_curve(iid_uniform(2), [1.0, 1.0], [5.0], samples=10_000, seed=0)

    def test_starved_window_rejected(self):
        with pytest.raises(ValueError):
            conditional_mean_curve(
                iid_gaussian(2), [1.0, 1.0], [0.0], samples=1_000, seed=0, min_count=5_000
            )


class TestSymmetryDeviation:
    def test_symmetric_families_zero(self):
        assert symmetry_deviation(iid_uniform(1)) == 0.0
        assert symmetry_deviation(iid_gaussian(1, mean=3.0)) <= 1e-12
        assert symmetry_deviation(iid_laplace(1, mean=-1.0)) <= 1e-12

    def test_exponential_strictly_asymmetric(self):
        dev = symmetry_deviation(iid_exponential(1, rate=1.0))
        assert dev > math.exp(-1.0)  # the offset x=1 from mu=1 already gives 1 - e^-2


class TestConditionalSupport:
    def test_uniform_diagonal(self):
        model = iid_uniform(2)
        assert conditional_support(model, [1.0, 1.0], 1.0) == pytest.approx((-1.0, 1.0))
        lo, hi = conditional_support(model, [1.0, 1.0], 2.0)
        assert lo == pytest.approx(0.0, abs=1e-12) and hi == pytest.approx(0.0, abs=1e-12)

    def test_outside_support_rejected(self):
        with pytest.raises(ValueError):
            conditional_support(iid_uniform(2), [1.0, 1.0], 2.5)

    def test_gaussian_wide_interval(self):
        model = iid_gaussian(2)
        lo, hi = conditional_support(model, [1.0, 2.0], 0.5)
        sd_x1 = math.sqrt(5.0)
        assert lo < -4.0 * sd_x1 and hi > 4.0 * sd_x1

    def test_axis_bias_cases(self):
        model = iid_uniform(2)
        # b1 = 0: the line fixes m2; X1 = -b2 m1
        lo, hi = conditional_support(model, [0.0, 2.0], 1.0)
        assert (lo, hi) == pytest.approx((-2.0, 0.0))
        # b2 = 0: the line fixes m1; X1 = b1 m2
        lo, hi = conditional_support(model, [3.0, 0.0], 1.5)
        assert (lo, hi) == pytest.approx((0.0, 3.0))


class TestTabulated:
    def _triangle_model(self):
        # symmetric triangle on [-1, 1]
        edges = np.linspace(-1.0, 1.0, 101)
        centers = 0.5 * (edges[:-1] + edges[1:])
        dens = 1.0 - np.abs(centers)
        dens /= dens.sum() * (edges[1] - edges[0])
        return tabulated_density([-1.0], [edges[1] - edges[0]], dens)

    def test_normalization_enforced(self):
        with pytest.raises(ValueError):
            tabulated_density([0.0], [0.5], np.array([1.0, 2.0]))

    def test_moments_and_mean(self):
        model = self._triangle_model()
        assert model.mean[0] == pytest.approx(0.0, abs=1e-12)
        assert model.marginal_variance(0) == pytest.approx(1.0 / 6.0, abs=1e-3)

    def test_sampling_matches_density(self):
        model = self._triangle_model()
        pts = model.sample(200_000, seed=14)
        assert abs(pts.mean()) < 3.0 * pts.std() / math.sqrt(pts.shape[0])
        assert pts.min() >= -1.0 and pts.max() <= 1.0

    def test_symmetry_detected(self):
        assert symmetry_deviation(self._triangle_model()) < 1e-12

    def test_csv_round_trip_2d(self, tmp_path):
        path = tmp_path / "density.csv"
        xs = np.linspace(0.05, 0.95, 10)
        with open(path, "w") as fh:
            fh.write("x1,x2,density\n")
            for x1 in xs:
                for x2 in xs:
                    fh.write(f"{x1},{x2},1.0\n")
        model = tabulated_from_csv(path)
        assert model.dim == 2
        assert np.allclose(model.mean, [0.5, 0.5], atol=1e-9)
        region = Region.from_halfspaces([Hyperplane(normal=[-1.0, 0.0], anchor=[0.5, 0.0])])
        est = region_mean(model, region)
        assert np.allclose(est.value, [0.25, 0.5], atol=1e-6)

    def test_csv_rejects_nonuniform_grid(self, tmp_path):
        path = tmp_path / "bad.csv"
        with open(path, "w") as fh:
            fh.write("x,density\n0.0,1.0\n0.1,1.0\n0.35,1.0\n")
        with pytest.raises(ValueError):
            tabulated_from_csv(path)


def test_estimate_with_error_fields():
    est = EstimateWithError(value=1.0, stderr=0.1, sample_count=100)
    assert est.value == 1.0 and est.stderr == 0.1 and est.sample_count == 100
