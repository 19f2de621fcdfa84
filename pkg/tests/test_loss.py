"""Likelihood loss: link layer, value/gradient correctness, Gaussian
reduction, batch semantics, and the one-solve-per-evaluation contract."""

import math

import numpy as np
import pytest

from tghnet import tgh
from tghnet.loss import (
    LinkConfig,
    batch_nll,
    gaussian_head_loss,
    gaussian_nll_and_grad,
    link,
    link_gaussian,
    nll_and_grad,
    tukey_head_loss,
)
from tghnet.tgh import InverseSolverConfig, TghParams

TIGHT = InverseSolverConfig(abs_tolerance=1e-15)

SOFTPLUS_0 = math.log(2.0)


class TestLink:
    def test_saturation_limits(self):
        params, _ = link(np.array([0.0, -40.0, 0.0, -40.0]))
        assert params.mu == 0.0
        assert params.sigma == pytest.approx(1e-4, rel=1e-6)
        assert params.g == 0.0
        assert params.h == pytest.approx(0.0, abs=1e-12)

    def test_values_at_zero_raw(self):
        params, _ = link(np.array([1.5, 0.0, 0.0, 0.0]))
        assert params.mu == 1.5
        assert params.sigma == pytest.approx(SOFTPLUS_0 + 1e-4)
        assert params.g == 0.0
        assert params.h == pytest.approx(0.25)  # h_max / 2

    def test_derivatives_match_finite_differences(self):
        rng = np.random.default_rng(5)
        raw = rng.normal(size=4)
        _, derivs = link(raw)
        for j in range(4):
            up, dn = raw.copy(), raw.copy()
            up[j] += 1e-6
            dn[j] -= 1e-6
            pu, _ = link(up)
            pd, _ = link(dn)
            fields = ("mu", "sigma", "g", "h")
            fd = (getattr(pu, fields[j]) - getattr(pd, fields[j])) / 2e-6
            np.testing.assert_allclose(derivs[j], fd, rtol=1e-6, atol=1e-12)

    def test_batch_shapes(self):
        raws = np.zeros((7, 4))
        params, derivs = link(raws)
        assert np.shape(params.mu) == (7,)
        assert derivs.shape == (7, 4)

    def test_custom_bounds(self):
        cfg = LinkConfig(sigma_floor=0.01, g_max=1.0, h_max=0.2)
        params, _ = link(np.array([0.0, 0.0, 40.0, 40.0]), cfg)
        assert params.g == pytest.approx(1.0)
        assert params.h == pytest.approx(0.2)

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            link(np.zeros(3))
        with pytest.raises(ValueError):
            link(np.array([0.0, np.nan, 0.0, 0.0]))
        with pytest.raises(ValueError):
            LinkConfig(sigma_floor=0.0)

    def test_gaussian_link(self):
        mu, sigma, derivs = link_gaussian(np.array([2.0, 0.0]))
        assert mu == 2.0
        assert sigma == pytest.approx(SOFTPLUS_0 + 1e-4)
        assert derivs.shape == (2,)


class TestNllAndGrad:
    def test_standard_normal_point(self):
        out = nll_and_grad(0.0, TghParams(0.0, 1.0, 0.0, 0.0))
        assert out.value == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(out.grad, [0.0, 1.0, 0.0, 0.0], atol=1e-9)

    def test_value_at_location(self):
        for sigma in (0.3, 1.0, 2.5):
            out = nll_and_grad(0.7, TghParams(0.7, sigma, 0.4, 0.3))
            assert out.value == pytest.approx(math.log(sigma), abs=1e-10)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(7)
        for _ in range(300):
            mu = rng.normal(0, 2)
            sigma = abs(rng.normal(1, 0.5)) + 0.1
            g = rng.uniform(-1.5, 1.5)
            h = rng.uniform(0, 0.5)
            y = mu + sigma * rng.normal(0, 2)
            out = nll_and_grad(y, TghParams(mu, sigma, g, h), TIGHT)
            fd = np.zeros(4)
            for j, val in enumerate((mu, sigma, g, h)):
                step = 1e-5 * max(1.0, abs(val))
                args = [mu, sigma, g, h]
                args[j] = val + step
                up = nll_and_grad(y, TghParams(*args), TIGHT).value
                args[j] = val - step
                dn = nll_and_grad(y, TghParams(*args), TIGHT).value
                fd[j] = (up - dn) / (2 * step)
            np.testing.assert_allclose(out.grad, fd, rtol=1e-5, atol=1e-7)

    def test_gaussian_consistency_grid(self):
        rng = np.random.default_rng(9)
        y = rng.normal(0, 2, size=500)
        mu = rng.normal(0, 1, size=500)
        sigma = rng.uniform(0.2, 3.0, size=500)
        zeros = np.zeros(500)
        tk = nll_and_grad(y, TghParams(mu, sigma, zeros, zeros))
        ga = gaussian_nll_and_grad(y, mu, sigma)
        np.testing.assert_allclose(tk.value, ga.value, atol=1e-9, rtol=0)
        np.testing.assert_allclose(tk.grad[:, :2], ga.grad, atol=1e-9, rtol=0)

    def test_shift_scale_equivariance(self):
        rng = np.random.default_rng(13)
        for _ in range(50):
            mu = rng.normal()
            sigma = rng.uniform(0.3, 2.0)
            g = rng.uniform(-1, 1)
            h = rng.uniform(0, 0.4)
            y = mu + sigma * rng.normal(0, 1.5)
            c = rng.normal(0, 3)
            s = rng.uniform(0.2, 5.0)
            lhs = nll_and_grad(y, TghParams(mu, sigma, g, h)).value
            rhs = nll_and_grad(
                (y - c) / s, TghParams((mu - c) / s, sigma / s, g, h)
            ).value + math.log(s)
            assert lhs == pytest.approx(rhs, abs=1e-9)

    def test_exactly_one_solve_per_evaluation(self):
        before = tgh.solver_call_count()
        nll_and_grad(0.4, TghParams(0.1, 1.0, 0.3, 0.2))
        assert tgh.solver_call_count() == before + 1
        before = tgh.solver_call_count()
        batch_nll(np.array([0.1, 0.2, 0.3]), TghParams(
            np.zeros(3), np.ones(3), np.zeros(3), np.zeros(3)))
        assert tgh.solver_call_count() == before + 1


class TestGaussianLoss:
    def test_at_location(self):
        out = gaussian_nll_and_grad(0.5, 0.5, 2.0)
        assert out.value == pytest.approx(math.log(2.0))
        assert out.grad[0] == 0.0

    def test_unit_case(self):
        assert gaussian_nll_and_grad(1.0, 0.0, 1.0).value == pytest.approx(0.5)

    def test_rejects_bad_sigma(self):
        with pytest.raises(ValueError):
            gaussian_nll_and_grad(0.0, 0.0, 0.0)

    def test_gradient_matches_finite_differences(self):
        y, mu, sigma = 1.3, 0.4, 0.8
        out = gaussian_nll_and_grad(y, mu, sigma)
        fd_mu = (
            gaussian_nll_and_grad(y, mu + 1e-7, sigma).value
            - gaussian_nll_and_grad(y, mu - 1e-7, sigma).value
        ) / 2e-7
        fd_sigma = (
            gaussian_nll_and_grad(y, mu, sigma + 1e-7).value
            - gaussian_nll_and_grad(y, mu, sigma - 1e-7).value
        ) / 2e-7
        np.testing.assert_allclose(out.grad, [fd_mu, fd_sigma], rtol=1e-6)


class TestBatchNll:
    def test_single_sample_equals_pointwise(self):
        point = nll_and_grad(0.9, TghParams(0.2, 1.1, 0.4, 0.1))
        batch = batch_nll(np.array([0.9]), TghParams(
            np.array([0.2]), np.array([1.1]), np.array([0.4]), np.array([0.1])))
        assert batch.mean == pytest.approx(point.value, rel=1e-14)
        np.testing.assert_allclose(batch.grads[0], point.grad, rtol=1e-14)

    def test_duplicated_sample_keeps_mean(self):
        params1 = TghParams(np.array([0.2]), np.array([1.1]), np.array([0.4]), np.array([0.1]))
        params3 = TghParams(*(np.repeat(np.asarray(v), 3) for v in (0.2, 1.1, 0.4, 0.1)))
        one = batch_nll(np.array([0.9]), params1)
        three = batch_nll(np.repeat(0.9, 3), params3)
        assert three.mean == pytest.approx(one.mean, rel=1e-14)

    def test_mean_of_three_hand_built_samples(self):
        ys = np.array([0.1, -0.4, 2.0])
        mus = np.array([0.0, 0.5, 1.0])
        sigmas = np.array([1.0, 0.7, 2.0])
        gs = np.array([0.0, 0.5, -0.8])
        hs = np.array([0.0, 0.2, 0.1])
        singles = [
            nll_and_grad(ys[i], TghParams(mus[i], sigmas[i], gs[i], hs[i])).value
            for i in range(3)
        ]
        batch = batch_nll(ys, TghParams(mus, sigmas, gs, hs))
        assert batch.mean == pytest.approx(np.mean(singles), rel=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            batch_nll(np.zeros(3), TghParams(
                np.zeros(2), np.ones(2), np.zeros(2), np.zeros(2)))


class TestHeadLosses:
    def test_tukey_head_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(21)
        raw = rng.normal(size=(6, 4))
        y = rng.normal(size=6)
        mean, head_grad, _ = tukey_head_loss(y, raw, solver_cfg=TIGHT)
        for i in range(6):
            for j in range(4):
                up, dn = raw.copy(), raw.copy()
                up[i, j] += 1e-5
                dn[i, j] -= 1e-5
                mu_up, _, _ = tukey_head_loss(y, up, solver_cfg=TIGHT)
                mu_dn, _, _ = tukey_head_loss(y, dn, solver_cfg=TIGHT)
                fd = (mu_up - mu_dn) / 2e-5
                np.testing.assert_allclose(head_grad[i, j], fd, rtol=1e-4, atol=1e-8)

    def test_gaussian_head_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(22)
        raw = rng.normal(size=(5, 2))
        y = rng.normal(size=5)
        mean, head_grad, _ = gaussian_head_loss(y, raw)
        for i in range(5):
            for j in range(2):
                up, dn = raw.copy(), raw.copy()
                up[i, j] += 1e-6
                dn[i, j] -= 1e-6
                fd = (gaussian_head_loss(y, up)[0] - gaussian_head_loss(y, dn)[0]) / 2e-6
                np.testing.assert_allclose(head_grad[i, j], fd, rtol=1e-5, atol=1e-9)
