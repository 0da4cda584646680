import numpy as np
import pytest
from scipy.signal import lfilter

from diffuse_cpf.core import make_rng
from diffuse_cpf.diagnostics import acf, chain_stats, iact, ire, mean_ci, neff
from diffuse_cpf.errors import ChainTooShort


def ar1(phi, n, rng):
    e = rng.standard_normal(n)
    x = lfilter([1.0], [1.0, -phi], e)
    return x


class TestIact:
    def test_white_noise(self):
        assert 0.9 <= iact(make_rng(1).standard_normal(10**5)) <= 1.2

    def test_ar1_closed_form(self):
        x = ar1(0.9, 10**6, make_rng(2))
        assert iact(x) == pytest.approx(19.0, rel=0.15)

    def test_constant_is_divergent(self):
        assert iact(np.full(500, 2.5)) == np.inf

    def test_non_terminating_is_divergent(self):
        # alternating signs: every pair sum of the biased ACF equals 1/n > 0
        x = (-1.0) ** np.arange(400)
        assert iact(x) == np.inf

    def test_too_short(self):
        with pytest.raises(ChainTooShort):
            iact(np.arange(99.0))

    def test_affine_invariance(self):
        x = ar1(0.5, 5000, make_rng(3))
        assert iact(-3.0 * x + 7.0) == pytest.approx(iact(x), rel=1e-12)
        assert iact(-x) == iact(x)


class TestEss:
    def test_neff_iid_scale(self):
        x = make_rng(4).standard_normal(1000)
        assert neff(x) == pytest.approx(1000 / iact(x))

    def test_ire_exact(self):
        assert ire(3.75, 16) == 60.0
        assert ire(28.92, 16) / 16 == 28.92


class TestAcf:
    def test_lag_zero(self):
        assert acf(make_rng(5).standard_normal(200))[0] == 1.0

    def test_ar1_decay(self):
        x = ar1(0.7, 10**6, make_rng(6))
        r = acf(x, 5)
        se = 3 * np.sqrt((1 + 0.7**2) / (1 - 0.7**2) / 10**6)
        assert np.all(np.abs(r - 0.7 ** np.arange(6)) < 3 * se + 1e-12)

    def test_white_noise_band(self):
        n = 10**4
        r = acf(make_rng(7).standard_normal(n), 50)[1:]
        assert np.mean(np.abs(r) < 3 / np.sqrt(n)) >= 0.95


class TestMeanCi:
    def test_constant_zero_width(self):
        assert mean_ci(np.full(200, 1.5)) == (1.5, 1.5)

    def test_iid_width(self):
        lo, hi = mean_ci(make_rng(8).standard_normal(10**4))
        assert hi - lo == pytest.approx(2 * 1.96 / 100, rel=0.1)

    def test_coverage(self):
        rng = make_rng(9)
        hits = 0
        for _ in range(500):
            lo, hi = mean_ci(ar1(0.5, 2000, rng))
            hits += lo <= 0.0 <= hi
        assert 0.92 <= hits / 500 <= 0.98

    def test_chain_stats_bundle(self):
        x = make_rng(10).standard_normal(400)
        st = chain_stats(x, N=32)
        assert st.ire == st.iact * 32 and st.n == 400
        assert st.neff == pytest.approx(400 / st.iact)
        assert st.acf.shape == (51,) and not st.divergent
