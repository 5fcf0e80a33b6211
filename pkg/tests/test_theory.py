import math

import numpy as np
import pytest
from scipy import integrate, stats

from adaptive_k.errors import QuadratureError, TheoryError
from adaptive_k.theory import (AxisSpec, GaussianMixture, adaptive_moments, adaptive_pdf,
                               adaptive_selection_rates, check_order, evaluate_point, integrate_density,
                               mixture_cdf, mixture_moments, mixture_pdf, mixture_sf, mkl_moments, mkl_pdf,
                               mkl_selection_rates, mse_adk, mse_mkl, mse_sgd, mse_surface,
                               order_statistic_pdf, pdf_curves)

NORMALIZATION_TOL = 1e-6


def integral(gm, func, upper=None):
    a, b = gm.integration_bounds()
    return integrate_density(lambda t: float(func(t)), a, b if upper is None else upper,
                             points=[gm.mu1, gm.mu2])


class TestGaussianMixture:

    @pytest.mark.parametrize("params", [
        dict(sigma1=0.0), dict(sigma2=-1.0), dict(tau=-0.1), dict(tau=1.5),
    ])
    def test_invalid(self, params):
        with pytest.raises(TheoryError):
            GaussianMixture(**params)

    def test_sample_flags_follow_tau(self, default_mixture, rng):
        values, flags = default_mixture.sample(200000, rng)
        assert values.shape == flags.shape == (200000,)
        assert flags.mean() == pytest.approx(0.4, abs=0.005)
        assert values[~flags].mean() == pytest.approx(0.0, abs=0.01)
        assert values[flags].mean() == pytest.approx(5.0, abs=0.02)


class TestMixtureDistribution:

    def test_pdf_at_zero(self, default_mixture):
        assert mixture_pdf(default_mixture, 0.0) == pytest.approx(0.242871, abs=1e-6)

    def test_pdf_degenerates_to_clean_normal(self, clean_mixture):
        xs = np.linspace(-6, 6, 101)
        np.testing.assert_allclose(mixture_pdf(clean_mixture, xs), stats.norm.pdf(xs), rtol=1e-12)

    def test_pdf_normalization(self, default_mixture):
        value, _ = integrate.quad(lambda t: mixture_pdf(default_mixture, t), -np.inf, np.inf)
        assert value == pytest.approx(1.0, abs=1e-8)

    def test_cdf_at_two(self, default_mixture):
        assert mixture_cdf(default_mixture, 2.0) == pytest.approx(0.613073, abs=1e-6)

    def test_cdf_limits(self, default_mixture):
        assert mixture_cdf(default_mixture, 1e3) == 1.0
        assert mixture_cdf(default_mixture, -1e3) == 0.0
        assert mixture_sf(default_mixture, 40.0) > 0.0

    def test_cdf_median_of_normal(self, clean_mixture):
        assert mixture_cdf(clean_mixture, 0.0) == pytest.approx(0.5)

    def test_cdf_monotone(self, default_mixture, rng):
        pairs = np.sort(rng.uniform(-20, 30, size=(1000, 2)), axis=1)
        assert np.all(mixture_cdf(default_mixture, pairs[:, 0]) <= mixture_cdf(default_mixture, pairs[:, 1]))

    def test_cdf_plus_sf(self, default_mixture):
        xs = np.linspace(-10, 15, 51)
        np.testing.assert_allclose(mixture_cdf(default_mixture, xs) + mixture_sf(default_mixture, xs), 1.0,
                                   atol=1e-14)

    def test_moments(self, default_mixture):
        mu_d, var_d = mixture_moments(default_mixture)
        assert mu_d == 2.0
        assert var_d == pytest.approx(8.2, abs=1e-9)

    def test_moments_monte_carlo(self, default_mixture, rng):
        values, _ = default_mixture.sample(1000000, rng)
        assert values.mean() == pytest.approx(2.0, abs=0.05)
        assert values.var() == pytest.approx(8.2, abs=0.05)

    def test_moments_clean(self, clean_mixture):
        assert mixture_moments(clean_mixture) == (0.0, 1.0)


class TestOrderStatistics:

    def test_single_draw_is_parent(self, default_mixture):
        xs = np.linspace(-4, 10, 57)
        np.testing.assert_allclose(order_statistic_pdf(default_mixture, 1, 1, xs), mixture_pdf(default_mixture, xs))

    @pytest.mark.parametrize("k", range(1, 11))
    def test_normalization(self, default_mixture, k):
        value = integral(default_mixture, lambda t: order_statistic_pdf(default_mixture, 10, k, t))
        assert value == pytest.approx(1.0, abs=NORMALIZATION_TOL)

    def test_mean_monte_carlo(self, default_mixture, rng):
        values, _ = default_mixture.sample(10 * 200000, rng)
        fifth = np.sort(values.reshape(200000, 10), axis=1)[:, 4]
        mean = integral(default_mixture, lambda t: t * order_statistic_pdf(default_mixture, 10, 5, t))
        assert mean == pytest.approx(fifth.mean(), abs=max(0.01, 3 * fifth.std() / math.sqrt(fifth.size)))

    @pytest.mark.parametrize("n,k", [(0, 1), (65, 1), (10, 0), (10, 11)])
    def test_out_of_range(self, default_mixture, n, k):
        with pytest.raises(TheoryError):
            order_statistic_pdf(default_mixture, n, k, 0.0)

    def test_large_n_is_finite(self, default_mixture):
        assert np.all(np.isfinite(order_statistic_pdf(default_mixture, 64, 32, np.linspace(-5, 10, 31))))

    def test_check_order(self):
        check_order(64, 64)
        with pytest.raises(TheoryError):
            check_order(10, 11)


class TestMklDistribution:

    def test_k_one_is_minimum(self, default_mixture):
        xs = np.linspace(-5, 10, 61)
        np.testing.assert_allclose(mkl_pdf(default_mixture, 10, 1, xs), order_statistic_pdf(default_mixture, 10, 1, xs),
                                   rtol=1e-9, atol=1e-15)

    @pytest.mark.parametrize("k", [2, 6, 9, 10])
    def test_matches_explicit_average(self, default_mixture, k):
        xs = np.linspace(-5, 12, 69)
        explicit = sum(order_statistic_pdf(default_mixture, 10, p, xs) for p in range(1, k + 1)) / k
        np.testing.assert_allclose(mkl_pdf(default_mixture, 10, k, xs), explicit, rtol=1e-8, atol=1e-15)

    def test_normalization(self, default_mixture):
        value = integral(default_mixture, lambda t: mkl_pdf(default_mixture, 10, 6, t))
        assert value == pytest.approx(1.0, abs=NORMALIZATION_TOL)

    def test_full_selection_recovers_parent_mean(self, default_mixture):
        mu_mkl, var_mkl = mkl_moments(default_mixture, 10, 10)
        assert mu_mkl == pytest.approx(2.0, abs=1e-6)
        assert var_mkl <= 8.2 + 1e-6

    def test_symmetric_parent(self, clean_mixture):
        mu_mkl, var_mkl = mkl_moments(clean_mixture, 10, 10)
        assert mu_mkl == pytest.approx(0.0, abs=1e-6)
        assert mse_mkl(clean_mixture, 10, 10) == pytest.approx(1.0, abs=1e-6)

    def test_moments_monte_carlo(self, default_mixture, rng):
        batches = 200000
        values, _ = default_mixture.sample(10 * batches, rng)
        kept = np.sort(values.reshape(batches, 10), axis=1)[:, :6]
        mu_mkl, var_mkl = mkl_moments(default_mixture, 10, 6)
        batch_means = kept.mean(axis=1)
        assert mu_mkl == pytest.approx(kept.mean(), abs=3 * batch_means.std() / math.sqrt(batches) + 1e-3)
        assert var_mkl == pytest.approx(kept.var(), rel=0.01)

    def test_subdivision_invariance(self, default_mixture):
        assert mkl_moments(default_mixture, 10, 6, limit=500) == pytest.approx(
            mkl_moments(default_mixture, 10, 6, limit=1000), abs=1e-9)


class TestAdaptiveDistribution:

    def test_zero_above_mean(self, default_mixture):
        assert adaptive_pdf(default_mixture, 2.5) == 0.0
        assert adaptive_pdf(default_mixture, 2.0) > 0.0

    def test_normalizer(self, default_mixture):
        assert adaptive_pdf(default_mixture, 0.0) == pytest.approx(0.242871 / 0.613073, rel=1e-5)

    def test_normalization(self, default_mixture):
        value = integral(default_mixture, lambda t: adaptive_pdf(default_mixture, t), upper=2.0)
        assert value == pytest.approx(1.0, abs=1e-8)

    def test_truncated_normal_closed_form(self, clean_mixture):
        mu_adk, var_adk = adaptive_moments(clean_mixture)
        assert mu_adk == pytest.approx(-math.sqrt(2.0 / math.pi), abs=1e-6)
        assert var_adk == pytest.approx(1.0 - 2.0 / math.pi, abs=1e-6)
        assert mse_adk(clean_mixture) == pytest.approx(1.0, abs=1e-6)

    def test_against_scipy_truncnorm(self):
        gm = GaussianMixture(mu1=1.0, sigma1=2.0, mu2=5.0, sigma2=2.0, tau=0.0)
        mean, var = stats.truncnorm.stats(-np.inf, 0.0, loc=1.0, scale=2.0, moments="mv")
        mu_adk, var_adk = adaptive_moments(gm)
        assert mu_adk == pytest.approx(float(mean), abs=1e-7)
        assert var_adk == pytest.approx(float(var), abs=1e-7)

    def test_moments_monte_carlo(self, default_mixture, rng):
        values, _ = default_mixture.sample(1600000, rng)
        accepted = values[values <= 2.0]
        mu_adk, var_adk = adaptive_moments(default_mixture)
        stderr = accepted.std() / math.sqrt(accepted.size)
        assert mu_adk == pytest.approx(accepted.mean(), abs=3 * stderr)
        assert var_adk == pytest.approx(accepted.var(), rel=0.01)
        assert mu_adk < 2.0
        assert var_adk < 8.2

    def test_empty_truncation_region(self, default_mixture, monkeypatch):
        monkeypatch.setattr("adaptive_k.theory.mixture_cdf", lambda gm, x: 0.0)
        with pytest.raises(TheoryError, match="empty truncation region"):
            adaptive_pdf(default_mixture, 0.0)
        with pytest.raises(TheoryError, match="empty truncation region"):
            adaptive_moments(default_mixture)


class TestMse:

    def test_sgd_default_point(self, default_mixture):
        assert mse_sgd(default_mixture) == pytest.approx(12.2, abs=1e-9)

    def test_sgd_degenerate_cases(self):
        assert mse_sgd(GaussianMixture(tau=0.0)) == pytest.approx(1.0)
        assert mse_sgd(GaussianMixture(tau=1.0)) == pytest.approx(25.0 + 4.0)

    def test_ordering_at_default_point(self, default_mixture):
        report = evaluate_point(default_mixture, 10, 6)
        assert report.mse_adk < report.mse_mkl < report.mse_sgd
        assert report.mkl_beats_sgd and report.adk_beats_mkl
        assert min(report.mse_sgd, report.mse_mkl, report.mse_adk) >= 0.0

    @pytest.mark.parametrize("tau", [0.1, 0.2, 0.3, 0.4])
    def test_adaptive_beats_mkl_for_each_noise_ratio(self, tau):
        gm = GaussianMixture(mu1=0.0, sigma1=1.0, mu2=5.0, sigma2=2.0, tau=tau)
        assert mse_adk(gm) < mse_mkl(gm, 10, 6)

    def test_mkl_beats_sgd_region(self):
        axes = [AxisSpec("mu2", 2.0, 8.0, 0.5), AxisSpec("sigma2", 0.5, 2.0, 0.25)]
        grid = mse_surface(axes, {"mu1": 0.0, "sigma1": 1.0, "tau": 0.4}, 10, 6)
        assert len(grid.reports) == 13 * 7
        assert all(report.mkl_beats_sgd for report in grid.reports)

    def test_identical_components_still_favour_mkl(self):
        gm = GaussianMixture(mu1=0.0, sigma1=1.0, mu2=0.0, sigma2=1.0, tau=0.3)
        assert mse_sgd(gm) == pytest.approx(1.0)
        assert mse_mkl(gm, 10, 6) < mse_sgd(gm)

    def test_mse_adk_monte_carlo(self, default_mixture, rng):
        values, flags = default_mixture.sample(1000000, rng)
        accepted = values[values <= 2.0]
        oracle = (accepted.mean() - 0.0) ** 2 + accepted.var()
        assert mse_adk(default_mixture) == pytest.approx(oracle, rel=0.01)


class TestSurface:

    def test_shape_and_row_major_order(self):
        axes = [AxisSpec("mu2", 3.0, 4.0, 0.5), AxisSpec("sigma2", 1.0, 2.0, 1.0)]
        grid = mse_surface(axes, {"mu1": 0.0, "sigma1": 1.0, "tau": 0.2}, 10, 6)
        assert grid.shape == (3, 2)
        assert [(r.params.mu2, r.params.sigma2) for r in grid.reports] == [
            (3.0, 1.0), (3.0, 2.0), (3.5, 1.0), (3.5, 2.0), (4.0, 1.0), (4.0, 2.0)]
        assert grid.report_at(1, 1).params.mu2 == 3.5
        rows = grid.rows()
        assert rows[0]["tau"] == 0.2 and rows[0]["n"] == 10 and rows[0]["k"] == 6
        assert set(rows[0]) >= {"mse_sgd", "mse_mkl", "mse_adk", "mkl_beats_sgd", "adk_beats_mkl"}

    def test_default_point_in_both_regions(self):
        axes = [AxisSpec("mu2", 4.0, 6.0, 1.0), AxisSpec("sigma2", 1.5, 2.5, 0.5)]
        grid = mse_surface(axes, {"mu1": 0.0, "sigma1": 1.0, "tau": 0.4}, 10, 6)
        report = grid.report_at(1, 1)
        assert (report.params.mu2, report.params.sigma2) == (5.0, 2.0)
        assert report.mkl_beats_sgd and report.adk_beats_mkl

    def test_single_axis(self):
        grid = mse_surface([AxisSpec("tau", 0.1, 0.4, 0.1)], {"mu1": 0.0, "sigma1": 1.0, "mu2": 5.0, "sigma2": 2.0},
                           10, 6)
        assert [r.params.tau for r in grid.reports] == [0.1, 0.2, 0.3, 0.4]

    def test_missing_fixed_parameter(self):
        with pytest.raises(TheoryError, match="missing"):
            mse_surface([AxisSpec("mu2", 1.0, 2.0, 1.0)], {"mu1": 0.0, "sigma1": 1.0, "tau": 0.4}, 10, 6)

    def test_invalid_axes(self):
        with pytest.raises(TheoryError):
            AxisSpec("mu1", 0.0, 1.0, 0.1)
        with pytest.raises(TheoryError):
            AxisSpec("mu2", 1.0, 0.0, 0.1)
        with pytest.raises(TheoryError):
            AxisSpec("mu2", 0.0, 1.0, 0.0)
        axes = [AxisSpec("mu2", 1.0, 2.0, 1.0)] * 2
        with pytest.raises(TheoryError, match="duplicate"):
            mse_surface(axes, {"mu1": 0.0, "sigma1": 1.0, "sigma2": 1.0, "tau": 0.4}, 10, 6)

    def test_axis_values_include_stop(self):
        assert AxisSpec("sigma2", 0.25, 4.0, 0.125).values().size == 31
        assert AxisSpec("mu2", 0.0, 8.0, 0.1).values()[-1] == 8.0

    def test_parallel_matches_serial(self):
        axes = [AxisSpec("mu2", 3.0, 5.0, 1.0), AxisSpec("sigma2", 1.0, 2.0, 1.0)]
        fixed = {"mu1": 0.0, "sigma1": 1.0, "tau": 0.3}
        serial = mse_surface(axes, fixed, 10, 6, workers=1)
        parallel = mse_surface(axes, fixed, 10, 6, workers=2)
        assert serial.rows() == parallel.rows()


class TestSelectionRates:

    def test_mkl_rates_monte_carlo(self, default_mixture, rng):
        precision, recall = mkl_selection_rates(default_mixture, 10, 6)
        assert 0.0 < precision < 1.0 and 0.0 < recall < 1.0

        batches = 100000
        values, flags = default_mixture.sample(10 * batches, rng)
        values, flags = values.reshape(batches, 10), flags.reshape(batches, 10)
        selected = np.zeros_like(flags)
        np.put_along_axis(selected, np.argsort(values, axis=1, kind="stable")[:, :6], True, axis=1)
        clean = ~flags
        hits = (selected & clean).sum(axis=1)
        has_clean = clean.sum(axis=1) > 0
        assert precision == pytest.approx((hits / 6).mean(), abs=0.005)
        assert recall == pytest.approx((hits[has_clean] / clean.sum(axis=1)[has_clean]).mean(), abs=0.005)

    def test_mkl_keep_all(self, default_mixture):
        precision, recall = mkl_selection_rates(default_mixture, 10, 10)
        assert precision == pytest.approx(0.6, abs=1e-9)
        assert recall == pytest.approx(1.0, abs=1e-9)

    def test_adaptive_rates(self, default_mixture):
        precision, recall, fraction = adaptive_selection_rates(default_mixture)
        assert fraction == pytest.approx(0.613073, abs=1e-6)
        assert recall == pytest.approx(stats.norm.cdf(2.0))
        assert precision == pytest.approx(0.6 * stats.norm.cdf(2.0) / 0.613073, rel=1e-5)


class TestQuadrature:

    def test_reports_non_convergence(self):
        with pytest.raises(QuadratureError) as info:
            integrate_density(lambda t: math.sin(1.0 / t), 1e-6, 1.0, limit=3)
        assert info.value.achieved_error > 1e-7

    def test_breakpoints_outside_interval_are_ignored(self):
        assert integrate_density(lambda t: 1.0, 0.0, 2.0, points=[-1.0, 0.0, 1.0, 3.0]) == pytest.approx(2.0)


class TestPdfCurves:

    def test_columns(self, default_mixture):
        xs = np.linspace(-5, 12, 35)
        curves = pdf_curves(default_mixture, 10, 6, xs, [1, 10])
        assert list(curves) == ["x", "f_D", "f_MKL", "f_adk", "f_MKL_k1", "f_MKL_k10"]
        np.testing.assert_allclose(curves["f_MKL_k10"], curves["f_D"])
        assert np.all(curves["f_adk"][xs > 2.0] == 0.0)
