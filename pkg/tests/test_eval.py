"""Residual diagnostics, prediction intervals, and density curves."""

import json
import math

import numpy as np
import pytest
from scipy import optimize, stats

from tghnet.data import load_csv
from tghnet.evaluate import (
    binned_residual_summary,
    coverage_table,
    density_curve,
    interval_coverage,
    ks_critical_value,
    ks_uniform,
    residuals,
    shortest_interval,
    symmetric_interval,
    write_qq_csv,
    write_report_csv,
    write_summary_json,
)
from tghnet.tgh import ShapeParams, TghParams, sample, standard_normal_cdf, tau, tau_prime

Z_975 = 1.9599639845400542


class TestResiduals:
    def test_targets_at_location(self):
        params = TghParams(np.full(5, 2.0), np.ones(5), np.full(5, 0.5), np.full(5, 0.1))
        report = residuals(np.full(5, 2.0), params)
        np.testing.assert_allclose(report.z_hat, 0.0, atol=1e-10)
        np.testing.assert_allclose(report.u, 0.5, atol=1e-10)

    def test_gaussian_case_is_standardized_residual(self):
        y = np.array([1.0, 3.0, -2.0])
        params = TghParams(np.zeros(3), np.full(3, 2.0), np.zeros(3), np.zeros(3))
        report = residuals(y, params)
        np.testing.assert_allclose(report.z_hat, y / 2.0, atol=1e-10)

    def test_self_sampled_data_passes_ks(self):
        params = TghParams(0.5, 1.5, 0.6, 0.2)
        y = sample(params, 20000, seed=2)
        pv = TghParams(*(np.full(20000, v) for v in (0.5, 1.5, 0.6, 0.2)))
        report = residuals(y, pv)
        assert report.ks_statistic < ks_critical_value(20000, 0.01)
        assert abs(np.mean(report.z_hat)) <= 3 / math.sqrt(20000)
        assert abs(np.var(report.z_hat) - 1) <= 5 / math.sqrt(20000)

    def test_qq_pairs_sorted_and_positioned(self):
        y = np.array([0.3, -1.0, 2.0, 0.1])
        params = TghParams(np.zeros(4), np.ones(4), np.zeros(4), np.zeros(4))
        report = residuals(y, params)
        np.testing.assert_allclose(report.qq_empirical, np.sort(y), atol=1e-10)
        want = [stats.norm.ppf(k / 5.0) for k in range(1, 5)]
        np.testing.assert_allclose(report.qq_theoretical, want, atol=1e-12)

    def test_qq_within_ks_band_for_self_generated_data(self):
        n = 20000
        params = TghParams(0.0, 1.0, -0.4, 0.15)
        y = sample(params, n, seed=3)
        pv = TghParams(*(np.full(n, v) for v in (0.0, 1.0, -0.4, 0.15)))
        report = residuals(y, pv)
        # simultaneous band on the uniform scale at the 1% level
        band = ks_critical_value(n, 0.01)
        positions = np.arange(1, n + 1) / (n + 1.0)
        u_sorted = np.asarray(standard_normal_cdf(report.qq_empirical))
        assert np.max(np.abs(u_sorted - positions)) < band + 1.0 / n

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            residuals(np.zeros(3), TghParams(np.zeros(2), np.ones(2), np.zeros(2), np.zeros(2)))

    def test_mean_nll_includes_constant(self):
        y = np.zeros(1)
        params = TghParams(np.zeros(1), np.ones(1), np.zeros(1), np.zeros(1))
        report = residuals(y, params)
        assert report.mean_nll == pytest.approx(0.5 * math.log(2 * math.pi), abs=1e-10)


class TestKs:
    def test_matches_scipy(self):
        rng = np.random.default_rng(4)
        u = rng.random(500)
        mine = ks_uniform(u)
        ref = stats.kstest(u, "uniform").statistic
        assert mine == pytest.approx(ref, abs=1e-12)

    def test_critical_value_formula(self):
        assert ks_critical_value(10000, 0.01) == pytest.approx(1.6276 / 100.0, abs=1e-4)


class TestSymmetricInterval:
    def test_normal_endpoints(self):
        iv = symmetric_interval(TghParams(0.0, 1.0, 0.0, 0.0), 0.05)
        assert iv.lower == pytest.approx(-Z_975, abs=1e-9)
        assert iv.upper == pytest.approx(Z_975, abs=1e-9)
        assert iv.gamma == 0.0
        assert iv.variant == "symmetric"

    def test_location_equivariance(self):
        base = symmetric_interval(TghParams(0.0, 1.0, 0.7, 0.2), 0.1)
        moved = symmetric_interval(TghParams(3.0, 1.0, 0.7, 0.2), 0.1)
        assert moved.lower == pytest.approx(base.lower + 3.0)
        assert moved.upper == pytest.approx(base.upper + 3.0)

    def test_coverage_on_self_sampled_data(self):
        params = TghParams(1.0, 2.0, 0.5, 0.1)
        iv = symmetric_interval(params, 0.05)
        y = sample(params, 10**6, seed=5)
        cov = interval_coverage(y, iv.lower, iv.upper)
        assert cov == pytest.approx(0.95, abs=3 * math.sqrt(0.05 * 0.95 / 10**6))

    def test_alpha_domain(self):
        with pytest.raises(ValueError):
            symmetric_interval(TghParams(0.0, 1.0, 0.0, 0.0), 1.5)

    def test_coverage_table_on_self_sampled_data(self):
        params = TghParams(0.0, 1.0, 0.4, 0.15)
        n = 100000
        y = sample(params, n, seed=12)
        pv = TghParams(*(np.full(n, v) for v in (0.0, 1.0, 0.4, 0.15)))
        table = coverage_table(y, pv)
        assert set(table) == {"0.5", "0.8", "0.9", "0.95", "0.99"}
        for key, got in table.items():
            want = float(key)
            se = math.sqrt(want * (1 - want) / n)
            assert got == pytest.approx(want, abs=4 * se), key


class TestShortestInterval:
    def test_symmetric_distribution_recovers_central_split(self):
        iv = shortest_interval(TghParams(0.0, 1.0, 0.0, 0.3), 0.05)
        assert iv.gamma == pytest.approx(0.025, abs=1e-5)
        sym = symmetric_interval(TghParams(0.0, 1.0, 0.0, 0.3), 0.05)
        assert iv.lower == pytest.approx(sym.lower, abs=1e-6)
        assert iv.upper == pytest.approx(sym.upper, abs=1e-6)

    def test_skewed_case_is_strictly_shorter(self):
        params = TghParams(0.0, 1.0, 0.8, 0.2)
        sym = symmetric_interval(params, 0.05)
        sho = shortest_interval(params, 0.05)
        assert (sho.upper - sho.lower) < (sym.upper - sym.lower)

    def test_never_longer_than_symmetric_over_grid(self):
        rng = np.random.default_rng(6)
        mu = rng.normal(size=40)
        sigma = rng.uniform(0.3, 2.0, size=40)
        g = rng.uniform(-1.0, 1.0, size=40)
        h = rng.uniform(0.0, 0.5, size=40)
        params = TghParams(mu, sigma, g, h)
        sym = symmetric_interval(params, 0.05)
        sho = shortest_interval(params, 0.05)
        assert np.all(
            (sho.upper - sho.lower) <= (sym.upper - sym.lower) + 1e-12
        )

    def test_alpha_half_central_interval(self):
        from tghnet.tgh import quantile

        iv = shortest_interval(TghParams(0.0, 1.0, 0.0, 0.0), 0.5)
        assert iv.lower == pytest.approx(quantile(0.25, TghParams(0.0, 1.0, 0.0, 0.0)), abs=1e-5)
        assert iv.upper == pytest.approx(quantile(0.75, TghParams(0.0, 1.0, 0.0, 0.0)), abs=1e-5)

    def test_exact_coverage_at_any_gamma(self):
        # mass between the interval's z-levels is (1 - gamma) - (alpha - gamma)
        alpha = 0.07
        for gamma in (0.001, alpha / 2, alpha - 0.001):
            mass = standard_normal_cdf(
                stats.norm.ppf(1 - gamma)
            ) - standard_normal_cdf(-stats.norm.ppf(1 - alpha + gamma))
            assert mass == pytest.approx(1 - alpha, abs=1e-12)

    def test_monte_carlo_coverage_independent_of_skew(self):
        params = TghParams(0.0, 1.0, 1.0, 0.2)
        iv = shortest_interval(params, 0.1)
        y = sample(params, 10**6, seed=7)
        cov = interval_coverage(y, iv.lower, iv.upper)
        assert cov == pytest.approx(0.9, abs=3 * math.sqrt(0.1 * 0.9 / 10**6))

    def test_grid_size_validation(self):
        with pytest.raises(ValueError):
            shortest_interval(TghParams(0.0, 1.0, 0.0, 0.0), 0.05, grid_size=2)


class TestDensityCurve:
    def test_integrates_to_one_on_wide_grid(self):
        params = TghParams(0.0, 1.0, 0.3, 0.1)
        grid = np.linspace(-30.0, 60.0, 200001)
        total = np.trapezoid(density_curve(params, grid), grid)
        assert total == pytest.approx(1.0, abs=1e-6)

    def test_gaussian_case_matches_normal_pdf(self):
        params = TghParams(0.7, 1.3, 0.0, 0.0)
        grid = np.linspace(-5, 6, 501)
        np.testing.assert_allclose(
            density_curve(params, grid),
            stats.norm.pdf(grid, loc=0.7, scale=1.3),
            atol=1e-12,
        )

    def test_mode_location_against_z_space_oracle(self):
        # mode of the density via y-grid argmax vs an independent z-space
        # maximization of phi(z)/(sigma*tau'(z)) mapped through tau
        params = TghParams(0.0, 1.0, 0.8, 0.1)
        grid = np.linspace(-4.0, 10.0, 200001)
        y_mode = grid[np.argmax(density_curve(params, grid))]

        def neg_log_density_z(z):
            return (
                math.log(tau_prime(z, ShapeParams(0.8, 0.1)))
                + 0.5 * z * z
            )

        res = optimize.minimize_scalar(neg_log_density_z, bounds=(-4, 4), method="bounded")
        z_mode = res.x
        want = float(tau(z_mode, ShapeParams(0.8, 0.1)))
        assert y_mode == pytest.approx(want, abs=1e-3)
        assert y_mode < 0.0  # right-skew pushes the mode left of the median

    def test_rejects_unsorted_grid(self):
        with pytest.raises(ValueError, match="sorted"):
            density_curve(TghParams(0.0, 1.0, 0.0, 0.0), np.array([1.0, 0.0]))


class TestBinnedResiduals:
    def test_uniform_residuals_center_on_half(self):
        rng = np.random.default_rng(8)
        feature = rng.random(5000)
        u = rng.random(5000)
        edges, means, counts = binned_residual_summary(feature, u, n_bins=5)
        assert len(edges) == 6
        assert counts.sum() == 5000
        np.testing.assert_allclose(means, 0.5, atol=0.05)


class TestReportWriters:
    def test_written_report_roundtrips(self, tmp_path):
        params = TghParams(0.2, 1.1, 0.4, 0.1)
        y = sample(params, 200, seed=9)
        pv = TghParams(*(np.full(200, v) for v in (0.2, 1.1, 0.4, 0.1)))
        report = residuals(y, pv)
        csv_path = tmp_path / "report.csv"
        write_report_csv(csv_path, y, pv, report)
        ds = load_csv(csv_path, "y", ["mu", "sigma", "g", "h", "z_hat", "u"])
        np.testing.assert_array_equal(ds.y, y)
        np.testing.assert_array_equal(ds.column("z_hat"), report.z_hat)

        qq_path = tmp_path / "qq.csv"
        write_qq_csv(qq_path, report)
        qq = load_csv(qq_path, "empirical", ["theoretical"])
        np.testing.assert_array_equal(qq.y, report.qq_empirical)

        json_path = tmp_path / "summary.json"
        write_summary_json(json_path, report, extra={"split": "val"})
        summary = json.loads(json_path.read_text())
        assert summary["n"] == 200
        assert summary["split"] == "val"
        assert summary["ks_statistic"] == report.ks_statistic
