import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from conftest import brute_force_mle

from pnrcount import EmitterModel, PhotonHistogram, pmf_theta, sample_histogram
from pnrcount.estimation import UnidentifiableError, log_likelihood, mle, profile_log_likelihood


class TestLogLikelihood:
    def test_bernoulli(self):
        assert log_likelihood(EmitterModel(1, 0.3), PhotonHistogram({1: 1})) == pytest.approx(math.log(0.3))
        assert log_likelihood(EmitterModel(1, 0.3), PhotonHistogram({0: 1})) == pytest.approx(math.log(0.7))
        assert log_likelihood(EmitterModel(1, 0.5), PhotonHistogram({0: 50, 1: 50})) == pytest.approx(
            100 * math.log(0.5), abs=1e-12)
        assert log_likelihood(EmitterModel(1, 0.5), PhotonHistogram({0: 50, 1: 50})) == pytest.approx(-69.3147, abs=1e-4)

    def test_impossible(self):
        h = PhotonHistogram({0: 3, 4: 1})
        assert log_likelihood(EmitterModel(3, 0.5), h) == -math.inf
        assert log_likelihood(EmitterModel(5, 0.0), h) == -math.inf
        assert log_likelihood(EmitterModel(4, 1.0), h) == -math.inf
        assert log_likelihood(EmitterModel(4, 1.0), PhotonHistogram({4: 2})) == 0.0

    def test_matches_scipy(self):
        h = sample_histogram(EmitterModel(40, 0.2), 1000, 5)
        N = np.flatnonzero(h.counts)
        ref = float(np.dot(h.counts[N], stats.binom.logpmf(N, 57, 0.13)))
        assert log_likelihood(EmitterModel(57, 0.13), h) == pytest.approx(ref, rel=1e-12)

    def test_profile_matches_direct(self):
        h = sample_histogram(EmitterModel(40, 0.2), 2000, 9)
        prof = profile_log_likelihood(h, h.max_count, h.max_count + 300)
        for M in (h.max_count, 40, 100, h.max_count + 300):
            p = h.total_photons / (h.nu * M)
            assert prof[M - h.max_count] == pytest.approx(log_likelihood(EmitterModel(M, p), h), abs=1e-7)


class TestMle:
    def test_noise_free_histogram(self):
        m = EmitterModel(10, 0.8)
        counts = np.round(pmf_theta(np.arange(11), m) * 1e8).astype(np.int64)
        r = mle(PhotonHistogram(counts))
        assert r.theta_hat.M == 10
        assert r.theta_hat.p == pytest.approx(0.8, abs=1e-6)
        assert r.converged
        bm, bp = brute_force_mle(PhotonHistogram(counts), 200)
        assert (bm, round(bp, 4)) == (10, 0.8)

    def test_bernoulli(self):
        r = mle(PhotonHistogram({0: 60, 1: 40}), M_max=1)
        assert r.theta_hat == EmitterModel(1, 0.4)
        assert r.search_bounds == (1, 1)

    def test_unidentifiable(self):
        with pytest.raises(UnidentifiableError):
            mle(PhotonHistogram({0: 100}))

    def test_M_max_below_data(self):
        with pytest.raises(ValueError):
            mle(PhotonHistogram({0: 1, 5: 1}), M_max=4)

    def test_result_invariants(self):
        h = sample_histogram(EmitterModel(40, 0.2), 5000, 21)
        r = mle(h)
        assert r.theta_hat.M >= h.max_count
        assert r.beta_hat.lam == pytest.approx(r.theta_hat.M * r.theta_hat.p, rel=1e-15)
        assert r.log_likelihood == pytest.approx(log_likelihood(r.theta_hat, h), abs=1e-9)
        assert r.theta_hat.M * r.theta_hat.p == pytest.approx(h.mean, abs=1e-9)
        assert r.search_bounds == (h.max_count, 10_000)

    def test_overdispersed_not_converged(self):
        # variance > mean: the likelihood keeps rising toward the Poisson limit
        h = PhotonHistogram({0: 50, 1: 10, 2: 10, 3: 10, 6: 20})
        r = mle(h, M_max=500)
        assert not r.converged and r.theta_hat.M == 500

    def test_ties_to_smaller_M(self):
        # all observations equal 2: M=2, p=1 has likelihood 1; nothing can beat it
        r = mle(PhotonHistogram({2: 10}), M_max=50)
        assert r.theta_hat == EmitterModel(2, 1.0) and r.log_likelihood == 0.0

    @settings(max_examples=25, deadline=None)
    @given(M=st.integers(1, 30), p=st.floats(0.05, 0.95), nu=st.integers(20, 500), seed=st.integers(0, 2**32))
    def test_inner_maximizer(self, M, p, nu, seed):
        h = sample_histogram(EmitterModel(M, p), nu, seed)
        if h.total_photons == 0:
            return
        for cand in (h.max_count, h.max_count + 3, 2 * h.max_count + 10):
            phat = h.total_photons / (h.nu * cand)
            base = log_likelihood(EmitterModel(cand, phat), h)
            for eps in (1e-6, -1e-6):
                q = phat + eps
                if 0 < q < 1:
                    assert log_likelihood(EmitterModel(cand, q), h) <= base + 1e-9


def test_consistency_median(paper_truth):
    Ms, lams = [], []
    for r in range(100):
        res = mle(sample_histogram(paper_truth, 10**5, 1000 + r), keep_profile=False)
        Ms.append(res.theta_hat.M)
        lams.append(res.theta_hat.M * res.theta_hat.p)
    assert 38 <= np.median(Ms) <= 42
    assert abs(np.median(lams) - 8.0) <= 0.08
