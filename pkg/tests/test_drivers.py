import numpy as np
import pytest
from scipy import stats

from diffuse_cpf.adapt import AswamAdapter, FixedAdapter, RamState
from diffuse_cpf.core import Box, UniformInit, make_rng
from diffuse_cpf.diagnostics import iact
from diffuse_cpf.drivers import (
    HyperModel,
    aai_cpf_run,
    aai_pg_run,
    dpg_bs_run,
    initial_trajectory,
    n_records,
    seir_initial_block_proposal,
    thetas,
    trajectories,
)
from diffuse_cpf.errors import DiffuseCPFError, NonFiniteTarget
from diffuse_cpf.kernels import exact_m1_kernel
from diffuse_cpf.models import (
    NoisyAR,
    NoisyArParams,
    ffbs_sample,
    kalman_smoother,
    simulate_noisy_ar,
)
from diffuse_cpf.models.seir import initial_domain


def _rw(T=10, sigma_1=3.0, seed=7):
    p = NoisyArParams(1.0, 1.0, 1.0, sigma_1)
    y, _ = simulate_noisy_ar(p, T, 0.0, make_rng(seed, "data"))
    return NoisyAR(p, y)


class TestBookkeeping:
    def test_empty_run(self, rw_small, rng):
        out = aai_cpf_run(np.zeros((rw_small.T, 1)), FixedAdapter(exact_m1_kernel(rw_small.m1)),
                          rw_small, 4, 0, rng)
        assert out == []
        assert trajectories(out).shape == (0, 0, 0)

    @pytest.mark.parametrize("n,burn,thin", [(50, 10, 3), (50, 0, 1), (51, 50, 1), (20, 5, 7)])
    def test_record_count(self, rw_small, rng, n, burn, thin):
        out = aai_cpf_run(np.zeros((rw_small.T, 1)), FixedAdapter(exact_m1_kernel(rw_small.m1)),
                          rw_small, 4, n, rng, burn_in=burn, thin=thin)
        assert len(out) == (n - burn) // thin == n_records(n, burn, thin)
        assert all(r.iteration > burn and (r.iteration - burn) % thin == 0 for r in out)

    def test_bad_schedule(self, rw_small, rng):
        with pytest.raises(ValueError):
            aai_cpf_run(np.zeros((rw_small.T, 1)), FixedAdapter(exact_m1_kernel(rw_small.m1)),
                        rw_small, 4, 10, rng, thin=0)

    def test_initial_trajectory_retries_then_aborts(self, rng):
        m = _rw()
        m.m1 = UniformInit(Box([100.0], [101.0]))
        with pytest.raises(DiffuseCPFError):
            initial_trajectory(m, np.array([0.0]), rng, max_tries=5)


class TestAaiCpf:
    def test_adapter_summary_recorded(self, rng):
        m = _rw(sigma_1=None)
        x0 = initial_trajectory(m, np.array([m.y[0]]), rng)
        out = aai_cpf_run(x0, AswamAdapter.start(x0[0]), m, 8, 30, rng)
        assert {"delta", "trace_sigma"} <= set(out[-1].adapt)
        assert all(0.0 <= r.alpha <= 1.0 for r in out)

    def test_frozen_adapter_is_homogeneous(self, rng):
        m = _rw(sigma_1=None)
        x0 = initial_trajectory(m, np.array([m.y[0]]), rng)
        ad = AswamAdapter.start(x0[0])
        aai_cpf_run(x0, ad, m, 8, 30, rng, adapt=False)
        assert ad.state.delta == 0.0 and np.array_equal(ad.state.sigma, np.eye(1))


class TestAaiPg:
    def _hyper(self, base):
        def factory(theta):
            p = base.params
            return NoisyAR(NoisyArParams(p.rho, float(np.exp(theta[0])), p.sigma_y, p.sigma_1), base.y)

        return HyperModel(lambda th: float(stats.norm(0.0, 0.5).logpdf(th[0])), factory, ("log_sigma_x",))

    def test_theta_changes_only_on_accept(self, rng):
        base = _rw()
        x0 = initial_trajectory(base, np.array([0.0]), rng)
        out = aai_pg_run([0.0], x0, self._hyper(base), FixedAdapter(exact_m1_kernel(base.m1)), 8, 200, rng)
        th = thetas(out)
        for k in range(1, len(out)):
            if not np.array_equal(th[k], th[k - 1]):
                assert out[k].theta_accepted
            if not out[k].theta_accepted:
                np.testing.assert_array_equal(th[k], th[k - 1])

    def test_nan_target_raises(self, rng):
        base = _rw()
        hyper = HyperModel(lambda th: float("nan"), lambda th: base)
        with pytest.raises(NonFiniteTarget):
            aai_pg_run([0.0], np.zeros((base.T, 1)), hyper, FixedAdapter(exact_m1_kernel(base.m1)), 4, 1, rng)

    def test_point_mass_reduces_to_aai_cpf(self):
        base = _rw()
        hyper = HyperModel(lambda th: 0.0 if th[0] == 0.0 else -np.inf, lambda th: base)
        k = FixedAdapter(exact_m1_kernel(base.m1))
        x0 = initial_trajectory(base, np.array([0.0]), make_rng(1))
        a = aai_pg_run([0.0], x0, hyper, k, 8, 6000, make_rng(2), burn_in=200)
        b = aai_cpf_run(x0, k, base, 8, 6000, make_rng(3), burn_in=200)
        assert np.all(thetas(a) == 0.0)
        ta, tb = trajectories(a), trajectories(b)
        for t in (0, base.T - 1):
            # thin to reduce autocorrelation before the two-sample test
            assert stats.ks_2samp(ta[::10, t, 0], tb[::10, t, 0]).pvalue > 1e-3

    def test_sigma_x_posterior_mean_vs_grid(self):
        p = NoisyArParams(1.0, 0.6, 1.0, 5.0)
        y, _ = simulate_noisy_ar(p, 20, 0.0, make_rng(11, "data"))
        base = NoisyAR(p, y)
        hyper = self._hyper(base)

        # grid oracle: y ~ N(0, s1^2 + sx^2 min(i, j) + sy^2 I)
        grid = np.linspace(-3.0, 2.0, 2001)
        idx = np.arange(20)
        logpost = []
        for g in grid:
            C = 25.0 + np.exp(2 * g) * np.minimum.outer(idx, idx) + np.eye(20)
            logpost.append(stats.multivariate_normal(np.zeros(20), C).logpdf(y)
                           + stats.norm(0.0, 0.5).logpdf(g))
        w = np.exp(np.array(logpost) - max(logpost))
        oracle = float(np.sum(w * np.exp(grid)) / np.sum(w))

        rng = make_rng(12)
        x0 = initial_trajectory(base, np.array([y[0]]), rng)
        out = aai_pg_run([np.log(0.6)], x0, hyper, FixedAdapter(exact_m1_kernel(base.m1)), 16, 8000, rng,
                         ram=RamState(np.array([[0.5]])), burn_in=1000)
        sx = np.exp(thetas(out)[:, 0])
        se = sx.std() * np.sqrt(iact(sx) / sx.size)
        assert abs(sx.mean() - oracle) < 3 * se + 1e-3


class TestDpgBs:
    def test_forced_rejection_keeps_x1(self, rng):
        m = _rw()
        m.m1 = UniformInit(Box([-1.0], [1.0]))
        x0 = initial_trajectory(m, np.array([0.0]), rng)
        out = dpg_bs_run(x0[0], x0[1:], m, 8, 30, rng, ram=RamState(np.array([[1e9]])), adapt=False)
        assert all(r.trajectory[0, 0] == 0.0 for r in out)
        assert all(r.alpha == 0.0 for r in out)

    def test_needs_two_steps(self, rng):
        m = _rw(T=1)
        with pytest.raises(ValueError):
            dpg_bs_run(np.zeros(1), np.zeros((0, 1)), m, 4, 1, rng)

    def test_one_step_invariance(self):
        m = _rw(T=8, sigma_1=3.0)
        lg = m.linear_gaussian()
        rng = make_rng(13)
        starts = ffbs_sample(lg, rng, 4000)
        ends = np.array([dpg_bs_run(s[0], s[1:], m, 4, 1, rng, ram=RamState(np.array([[1.0]])),
                                    adapt=False)[0].trajectory for s in starts])
        mean, cov = kalman_smoother(lg)
        for t in (0, m.T - 1):
            ref = stats.norm(mean[t, 0], np.sqrt(cov[t, 0, 0])).cdf
            assert stats.kstest(ends[:, t, 0], ref).pvalue > 1e-3

    def test_x1_acceptance_tracks_ram_target(self):
        # weak coupling between x1 and x2: the x1 conditional is near Gaussian
        p = NoisyArParams(1.0, 20.0, 1.0, 10.0)
        y, _ = simulate_noisy_ar(p, 10, 0.0, make_rng(14, "data"))
        m = NoisyAR(p, y)
        rng = make_rng(15)
        x0 = initial_trajectory(m, np.array([y[0]]), rng)
        out = dpg_bs_run(x0[0], x0[1:], m, 8, 6000, rng, burn_in=2000)
        assert abs(np.mean([r.alpha for r in out]) - 0.441) < 0.05


class TestSeirProposal:
    popsize = 10000
    current = np.array([9000.0, 600.0, 400.0, 0.0, 0.2])

    def test_zero_step(self):
        cand = seir_initial_block_proposal(self.current, np.eye(3), None, self.popsize, U=np.zeros(3))
        np.testing.assert_array_equal(cand, self.current)

    def test_negative_after_rounding_rejected(self):
        cur = np.array([9990.0, 2.0, 8.0, 0.0, 0.0])
        cand = seir_initial_block_proposal(cur, np.eye(3), None, self.popsize, U=np.array([-5.2, 0.0, 0.0]))
        assert cand[1] == -3.0
        assert not initial_domain(self.popsize).contains(cand)

    def test_conservation_and_rounding(self):
        cand = seir_initial_block_proposal(self.current, np.eye(3), None, self.popsize,
                                           U=np.array([0.6, -0.4, 0.3]))
        assert cand[1] == 601.0 and cand[2] == 400.0 and cand[3] == 0.0
        assert cand[:4].sum() == self.popsize

    def test_rounding_bias_small(self):
        rng = make_rng(16)
        S = np.diag([3.3, 2.0, 0.1])
        E = np.array([seir_initial_block_proposal(self.current, S, rng, self.popsize)[1]
                      for _ in range(100000)])
        assert abs(E.mean() - self.current[1]) < 0.5
