import math

import numpy as np
import pytest

from diffuse_cpf.adapt import (
    AmAdapter,
    AmState,
    AswamAdapter,
    AswamState,
    DgiAdapter,
    DgiScaleState,
    RamState,
    am_update,
    aswam_update,
    dgi_scale_update,
    project_stability,
    ram_update,
    step_size,
)
from diffuse_cpf.core import Box, GaussianInit, make_rng
from diffuse_cpf.cpf import AdaptData, PathSelector
from diffuse_cpf.errors import SelectorMismatch

BS = PathSelector.BACKWARD_SAMPLING


def _data(v, X, b1=0, selector=BS):
    return AdaptData(b1, np.asarray(v, float), np.asarray(X, float), selector)


class TestStepSize:
    def test_first_step_capped(self):
        assert step_size(1, 0.66, 0.5) == 0.5

    def test_power_law(self):
        # 32^-0.66 = exp(-0.66 ln 32)
        assert step_size(32) == pytest.approx(0.1015315495445294, abs=1e-12)

    def test_decays_monotonically(self):
        vals = [step_size(j) for j in (1, 10, 100, 10**4, 10**6)]
        assert vals == sorted(vals, reverse=True)
        assert vals[-1] < 1e-3

    def test_rejects_zero(self):
        with pytest.raises(ValueError):
            step_size(0)


class TestAm:
    def test_full_step(self):
        s = AmState(np.array([1.0, 2.0]), np.eye(2), 1.0)
        x = np.array([3.0, -1.0])
        new = am_update(s, x, 1, eta=1.0)
        np.testing.assert_array_equal(new.mu, x)
        np.testing.assert_array_equal(new.sigma, np.outer([2.0, -3.0], [2.0, -3.0]))

    def test_fixed_point_product(self):
        s = AmState(np.array([0.0]), np.eye(1), 1.0)
        x = np.array([1.0])
        prod = 1.0
        for j in range(1, 201):
            s = am_update(s, x, j)
            prod *= 1.0 - min(0.5, j ** -0.66)
        assert abs(s.mu[0] - 1.0) == pytest.approx(prod, rel=1e-10)

    def test_covariance_consistency(self):
        rng = make_rng(21)
        s = AmState(np.zeros(2), np.eye(2), 1.0)
        draws = rng.standard_normal((100000, 2)) * [1.0, 2.0]
        for j, x in enumerate(draws, start=1):
            s = am_update(s, x, j)
        np.testing.assert_allclose(np.diag(s.sigma), [1.0, 4.0], rtol=0.1)
        assert abs(s.sigma[0, 1]) < 0.2

    def test_zero_step_identity(self):
        s = AmState(np.array([0.3, -0.2]), np.array([[2.0, 0.1], [0.1, 1.0]]), 2.0)
        new = am_update(s, np.array([5.0, 5.0]), 3, eta=0.0)
        assert np.array_equal(new.mu, s.mu) and np.array_equal(new.sigma, s.sigma)

    def test_kernel_cov_scaled(self):
        ad = AmAdapter.start(np.zeros(2))
        assert ad.state.c == pytest.approx(2.38**2 / 2)
        np.testing.assert_allclose(ad.kernel.cov, ad.state.c * np.eye(2))


class TestAswam:
    def test_on_target_delta_unchanged(self):
        s = AswamState(np.zeros(1), np.eye(1), 0.7, alpha_target=0.8)
        new = aswam_update(s, _data([0.2, 0.8], [[0.0], [1.0]]), 5)
        assert new.delta == 0.7

    def test_reference_retained_shrinks(self):
        s = AswamState(np.zeros(1), np.eye(1), 0.0, alpha_target=0.8)
        new = aswam_update(s, _data([1.0, 0.0], [[0.0], [1.0]]), 4)
        assert new.delta == pytest.approx(-step_size(4) * 0.8, abs=1e-15)

    def test_weighted_oracle(self):
        mu = np.array([0.5, -1.0])
        sig = np.array([[2.0, 0.3], [0.3, 1.5]])
        X = np.array([[1.0, 2.0], [-1.0, 0.5]])
        s = AswamState(mu, sig, 0.1, alpha_target=0.6)
        new = aswam_update(s, _data([0.3, 0.7], X), 1, eta=0.25)
        # hand evaluation: weighted mean -0.4, 0.95
        mu_exp = 0.75 * mu + 0.25 * np.array([0.3 * 1.0 + 0.7 * -1.0, 0.3 * 2.0 + 0.7 * 0.5])
        d1, d2 = X[0] - mu, X[1] - mu
        sig_exp = 0.75 * sig + 0.25 * (0.3 * np.outer(d1, d1) + 0.7 * np.outer(d2, d2))
        np.testing.assert_allclose(new.mu, mu_exp, atol=1e-12)
        np.testing.assert_allclose(new.sigma, sig_exp, atol=1e-12)
        assert new.delta == pytest.approx(0.1 + 0.25 * (0.7 - 0.6), abs=1e-12)

    def test_rejects_ancestor_tracing(self):
        s = AswamState(np.zeros(1), np.eye(1))
        with pytest.raises(SelectorMismatch):
            aswam_update(s, _data([0.5, 0.5], [[0.0], [1.0]], selector=PathSelector.ANCESTOR_TRACING), 1)

    def test_free_coordinates(self):
        s = AswamState(np.zeros(1), np.eye(1))
        X = np.array([[9.0, 1.0], [9.0, 3.0]])
        new = aswam_update(s, _data([0.5, 0.5], X), 1, eta=1.0, free=(1,))
        assert new.mu.tolist() == [2.0]

    def test_symmetric_output(self):
        rng = make_rng(1)
        s = AswamState(np.zeros(3), np.eye(3))
        for j in range(1, 50):
            X = rng.standard_normal((5, 3))
            v = rng.dirichlet(np.ones(5))
            s = aswam_update(s, _data(v, X), j)
        assert np.array_equal(s.sigma, s.sigma.T)

    def test_zero_step_identity(self):
        s = AswamState(np.array([0.3]), np.array([[2.0]]), -0.4, 0.8)
        new = aswam_update(s, _data([0.1, 0.9], [[1.0], [2.0]]), 1, eta=0.0)
        assert np.array_equal(new.mu, s.mu) and np.array_equal(new.sigma, s.sigma)
        assert new.delta == s.delta

    def test_adapter_kernel_scale(self):
        ad = AswamAdapter.start(np.zeros(1), Box([-5.0], [5.0]))
        ad.update(_data([0.0, 1.0], [[0.0], [1.0]]), 1)
        np.testing.assert_allclose(ad.kernel.cov, np.exp(ad.state.delta) * ad.state.sigma)


class TestDgi:
    def test_on_target(self):
        s = DgiScaleState(0.3, 0.8)
        assert dgi_scale_update(s, _data([0.2, 0.8], [[0], [1]]), 2).varsigma == 0.3

    def test_logistic_value(self):
        s = DgiScaleState(0.0, 0.4)
        new = dgi_scale_update(s, _data([0.2, 0.8], [[0], [1]]), 1, eta=0.5)
        assert new.varsigma == pytest.approx(0.2, abs=1e-15)
        assert new.beta == pytest.approx(0.549833997312478, abs=1e-12)

    def test_clamped_under_constant_drive(self):
        s = DgiScaleState(0.0, 0.8)
        for j in range(1, 5000):
            s = dgi_scale_update(s, _data([0.0, 1.0], [[0], [1]]), j, eta=0.5)
        assert s.varsigma == 15.0
        assert 0.999 < s.beta < 1.0

    def test_adapter_builds_cn_kernel(self):
        ad = DgiAdapter(GaussianInit([0.0], [[100.0]]))
        assert ad.kernel.beta == 0.5
        ad.update(_data([0.0, 1.0], [[0], [1]]), 1)
        assert ad.kernel.beta > 0.5


class TestRam:
    def test_on_target_unchanged(self):
        s = RamState(np.array([[2.0]]))
        assert ram_update(s, np.array([0.3]), 0.441, 5).S is s.S

    def test_scalar_identity(self):
        s = RamState(np.array([[1.7]]))
        new = ram_update(s, np.array([-0.4]), 0.9, 3)
        eta = min(0.5, 1 * 3 ** -0.66)
        assert new.S[0, 0] ** 2 == pytest.approx(1.7**2 * (1 + eta * (0.9 - 0.441)), rel=1e-12)

    def test_rebuild_and_factor(self):
        rng = make_rng(8)
        S = np.tril(rng.standard_normal((3, 3)))
        S[np.diag_indices(3)] = np.abs(S[np.diag_indices(3)]) + 0.5
        U = rng.standard_normal(3)
        new = ram_update(RamState(S), U, 0.1, 2)
        eta = min(0.5, 3 * 2 ** -0.66)
        M = S @ (np.eye(3) + eta * (0.1 - 0.441) * np.outer(U, U) / (U @ U)) @ S.T
        assert np.linalg.norm(new.S @ new.S.T - M) < 1e-10
        assert np.allclose(new.S, np.tril(new.S)) and np.all(np.diag(new.S) > 0)

    def test_long_run_factor_property(self):
        rng = make_rng(9)
        s = RamState.identity(2)
        worst = 0.0
        for n in range(1, 10001):
            U = rng.standard_normal(2)
            a = rng.random()
            new = ram_update(s, U, a, n)
            eta = min(0.5, 2 * n ** -0.66)
            M = s.S @ (np.eye(2) + eta * (a - 0.441) * np.outer(U, U) / (U @ U)) @ s.S.T
            worst = max(worst, np.abs(new.S @ new.S.T - M).max() / max(1.0, np.abs(M).max()))
            s = new
        assert worst < 1e-10

    def test_zero_step_identity(self):
        s = RamState(np.array([[1.0, 0.0], [0.2, 0.9]]))
        assert ram_update(s, np.ones(2), 0.9, 1, eta=0.0).S is s.S


class TestProjection:
    def test_floor(self):
        sig, _ = project_stability(np.diag([1e-12, 1.0]), None, 1e-6)
        np.testing.assert_allclose(np.linalg.eigvalsh(sig), [1e-6, 1.0], rtol=1e-9)

    def test_unchanged_when_stable(self):
        sig = np.array([[2.0, 0.5], [0.5, 1.0]])
        out, delta = project_stability(sig, 0.3, 1e-6)
        assert out is sig and delta == 0.3

    def test_delta_clamp(self):
        _, delta = project_stability(np.eye(1), 50.0, 1e-6)
        assert delta == pytest.approx(-math.log(1e-6))

    def test_random_symmetric(self):
        rng = make_rng(10)
        for _ in range(1000):
            A = rng.standard_normal((3, 3))
            sig, _ = project_stability(0.5 * (A + A.T), None, 1e-3)
            assert np.linalg.eigvalsh(sig).min() >= 1e-3 * (1 - 1e-9)

    @pytest.mark.parametrize("mode", ["project", "reject"])
    def test_adapter_modes(self, mode):
        ad = AmAdapter.start(np.zeros(1), stabilise=mode, eps=0.5)
        for j in range(1, 30):
            ad.update(_data([1.0], [[0.0]]), j)
        assert np.linalg.eigvalsh(ad.state.sigma).min() >= 0.5 - 1e-12

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            AmAdapter.start(np.zeros(1), stabilise="sometimes")
