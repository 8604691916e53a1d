import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq
from scipy.special import digamma
from scipy.stats import multivariate_normal

from spldavb.linalg import inv_pd
from spldavb.model import (
    SpldaModel,
    SuffStats,
    accumulate_stats,
    center_stats,
    marginal_params,
)
from spldavb.vbpoint import (
    DirichletPosterior,
    Hyperparams,
    Responsibilities,
    SpeakerPosteriors,
    accumulators,
    elbo_point,
    min_divergence,
    mstep_V,
    mstep_W,
    mstep_tau0,
    standardize_posteriors,
    update_q_pi,
    update_q_theta,
    update_q_y,
)


def random_model(rng, d, n_y):
    a = rng.standard_normal((d, d))
    return SpldaModel(
        mu=rng.standard_normal(d),
        v=rng.standard_normal((d, n_y)),
        w=a @ a.T + d * np.eye(d),
    )


def random_posteriors(rng, m, n_y, kappa=1.0):
    ybar = rng.standard_normal((m, n_y))
    prec = np.empty((m, n_y, n_y))
    for i in range(m):
        a = rng.standard_normal((n_y, n_y))
        prec[i] = a @ a.T + n_y * np.eye(n_y)
    return SpeakerPosteriors(ybar=ybar, prec=prec, kappa=kappa)


def empty_stats_and_posteriors(d, n_y):
    stats = center_stats(
        SuffStats(n=np.zeros(0), f=np.zeros((0, d)), s=np.zeros((d, d))),
        np.zeros(d))
    posts = SpeakerPosteriors(ybar=np.zeros((0, n_y)),
                              prec=np.zeros((0, n_y, n_y)))
    return stats, posts


class TestUpdateQY:
    def test_zero_counts_gives_prior(self):
        rng = np.random.default_rng(0)
        model = random_model(rng, 4, 2)
        stats = center_stats(
            SuffStats(n=np.zeros(3), f=np.zeros((3, 4)), s=np.zeros((4, 4))),
            model.mu)
        posts = update_q_y(stats, model)
        np.testing.assert_array_equal(posts.ybar, 0.0)
        np.testing.assert_array_equal(posts.prec, np.broadcast_to(np.eye(2), (3, 2, 2)))

    def test_scalar_case(self):
        model = SpldaModel(mu=np.zeros(1), v=np.ones((1, 1)), w=np.ones((1, 1)))
        stats = center_stats(
            SuffStats(n=np.array([3.0]), f=np.array([[6.0]]),
                      s=np.array([[12.0]])), model.mu)
        posts = update_q_y(stats, model)
        assert posts.prec[0, 0, 0] == pytest.approx(4.0)
        assert posts.ybar[0, 0] == pytest.approx(1.5)

    def test_matches_per_speaker_oracle(self):
        rng = np.random.default_rng(4)
        d, n_y, m = 5, 3, 6
        model = random_model(rng, d, n_y)
        resp = rng.random((20, m))
        resp /= resp.sum(axis=1, keepdims=True)
        phi = rng.standard_normal((20, d))
        stats = center_stats(accumulate_stats(resp, phi), model.mu)
        posts = update_q_y(stats, model)
        for i in range(m):
            l_i = np.eye(n_y) + stats.n[i] * model.v.T @ model.w @ model.v
            y_i = np.linalg.solve(l_i, model.v.T @ model.w @ stats.fbar[i])
            np.testing.assert_allclose(posts.prec[i], (l_i + l_i.T) / 2, atol=1e-12)
            np.testing.assert_allclose(posts.ybar[i], y_i, rtol=1e-10, atol=1e-12)

    def test_annealed_covariance_scaling(self):
        rng = np.random.default_rng(9)
        model = random_model(rng, 4, 2)
        resp = np.ones((10, 1))
        phi = rng.standard_normal((10, 4))
        stats = center_stats(accumulate_stats(resp, phi), model.mu)
        full = update_q_y(stats, model, kappa=1.0)
        half = update_q_y(stats, model, kappa=0.5)
        np.testing.assert_array_equal(half.ybar, full.ybar)
        np.testing.assert_allclose(half.cov(), 2.0 * full.cov(), rtol=1e-12)

    def test_requires_centered_stats(self):
        model = random_model(np.random.default_rng(1), 3, 1)
        with pytest.raises(ValueError, match="centered"):
            update_q_y(SuffStats(n=np.ones(1), f=np.ones((1, 3))), model)


class TestUpdateQTheta:
    def test_single_cluster(self):
        rng = np.random.default_rng(2)
        model = random_model(rng, 3, 2)
        posts = random_posteriors(rng, 1, 2)
        resp = update_q_theta(rng.standard_normal((7, 3)), posts, model,
                              DirichletPosterior(np.array([2.0])))
        np.testing.assert_array_equal(resp.r, np.ones((7, 1)))

    def test_identical_clusters_split_evenly(self):
        rng = np.random.default_rng(6)
        model = random_model(rng, 3, 2)
        one = random_posteriors(rng, 1, 2)
        posts = SpeakerPosteriors(
            ybar=np.repeat(one.ybar, 2, axis=0),
            prec=np.repeat(one.prec, 2, axis=0))
        resp = update_q_theta(rng.standard_normal((5, 3)), posts, model,
                              DirichletPosterior(np.array([3.0, 3.0])))
        np.testing.assert_allclose(resp.r, 0.5, atol=1e-12)

    def test_softmax_oracle(self):
        rng = np.random.default_rng(8)
        model = random_model(rng, 4, 2)
        posts = random_posteriors(rng, 3, 2)
        dirichlet = DirichletPosterior(np.array([1.0, 2.0, 3.0]))
        phi = rng.standard_normal((11, 4))
        for kappa in (1.0, 0.4):
            resp = update_q_theta(phi, posts, model, dirichlet, kappa=kappa)
            z = kappa * resp.log_rho
            oracle = np.exp(z - z.max(axis=1, keepdims=True))
            oracle /= oracle.sum(axis=1, keepdims=True)
            np.testing.assert_allclose(resp.r, oracle, rtol=1e-13, atol=1e-15)
            assert np.abs(resp.r.sum(axis=1) - 1.0).max() < 1e-12

    def test_small_kappa_flattens(self):
        rng = np.random.default_rng(10)
        model = random_model(rng, 3, 1)
        posts = random_posteriors(rng, 4, 1)
        dirichlet = DirichletPosterior(np.ones(4))
        phi = rng.standard_normal((6, 3))
        resp = update_q_theta(phi, posts, model, dirichlet, kappa=1e-6)
        assert np.ptp(resp.r) < 1e-3


class TestUpdateQPi:
    def test_counts_plus_prior(self):
        post = update_q_pi(np.array([2.0, 5.0]), tau0=0.5)
        np.testing.assert_array_equal(post.tau, [2.5, 5.5])

    def test_digamma_expectation(self):
        # psi(2) = psi(1) + 1, so the first component gives exactly -1
        post = DirichletPosterior(np.array([1.0, 1.0]))
        assert post.e_ln_pi[0] == pytest.approx(
            digamma(1.0) - digamma(2.0))
        assert post.e_ln_pi[0] == pytest.approx(-1.0)

    def test_annealed_formula(self):
        post = update_q_pi(np.array([4.0]), tau0=1.5, kappa=0.5)
        assert post.tau[0] == pytest.approx(0.5 * (4.0 + 1.5 - 1.0) + 1.0)

    def test_kappa_one_bit_identical(self):
        counts = np.array([0.3, 7.7, 1.1])
        a = update_q_pi(counts, tau0=0.9, kappa=1.0)
        b = update_q_pi(counts, tau0=0.9)
        np.testing.assert_array_equal(a.tau, b.tau)

    def test_rejects_negative_counts(self):
        with pytest.raises(ValueError):
            update_q_pi(np.array([-0.1]), tau0=1.0)


class TestAccumulators:
    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(12)
        m, d, n_y = 4, 5, 2
        resp = rng.random((15, m))
        resp /= resp.sum(axis=1, keepdims=True)
        phi = rng.standard_normal((15, d))
        stats = accumulate_stats(resp, phi)
        posts = random_posteriors(rng, m, n_y)
        c, r = accumulators(stats, posts)
        c_or = np.zeros((d, n_y + 1))
        r_or = np.zeros((n_y + 1, n_y + 1))
        eyy = posts.e_yy_tilde()
        yt = posts.e_ytilde()
        for i in range(m):
            c_or += np.outer(stats.f[i], yt[i])
            r_or += stats.n[i] * eyy[i]
        np.testing.assert_allclose(c, c_or, atol=1e-12)
        np.testing.assert_allclose(r, r_or, atol=1e-12)


class TestElbo:
    def test_reduces_to_gaussian_loglik(self):
        # V = 0 and a single cluster: the bound is tight and equals the
        # sum of Gaussian log-densities of the observations.
        rng = np.random.default_rng(14)
        d = 3
        mu = rng.standard_normal(d)
        a = rng.standard_normal((d, d))
        w = a @ a.T + d * np.eye(d)
        model = SpldaModel(mu=mu, v=np.zeros((d, 2)), w=w)
        phi = rng.standard_normal((8, d))
        resp = Responsibilities(r=np.ones((8, 1)))
        stats = center_stats(accumulate_stats(resp.r, phi), mu)
        posts = update_q_y(stats, model)
        stats_d, posts_d = empty_stats_and_posteriors(d, 2)
        dirichlet = update_q_pi(stats.n, tau0=1.0)
        total, terms = elbo_point(stats, stats_d, posts, posts_d, resp,
                                  dirichlet, model, Hyperparams())
        oracle = multivariate_normal(mean=mu, cov=inv_pd(w)).logpdf(phi).sum()
        assert total == pytest.approx(oracle, rel=1e-10)
        assert len(terms) == 10

    def test_terms_sum_to_total(self):
        rng = np.random.default_rng(15)
        d, n_y, m = 4, 2, 3
        model = random_model(rng, d, n_y)
        resp_r = rng.random((12, m))
        resp_r /= resp_r.sum(axis=1, keepdims=True)
        phi = rng.standard_normal((12, d))
        stats = center_stats(accumulate_stats(resp_r, phi), model.mu)
        posts = update_q_y(stats, model)
        labels = np.array([0, 0, 1, 1, 1])
        phi_d = rng.standard_normal((5, d))
        r_d = np.zeros((5, 2))
        r_d[np.arange(5), labels] = 1.0
        stats_d = center_stats(accumulate_stats(r_d, phi_d), model.mu)
        posts_d = update_q_y(stats_d, model)
        dirichlet = update_q_pi(stats.n, tau0=1.0)
        total, terms = elbo_point(stats, stats_d, posts, posts_d,
                                  Responsibilities(r=resp_r), dirichlet,
                                  model, Hyperparams())
        assert total == pytest.approx(sum(terms.values()), abs=1e-12)

    def test_data_term_scales_with_duplication(self):
        rng = np.random.default_rng(16)
        d, n_y, m = 3, 2, 2
        model = random_model(rng, d, n_y)
        resp = rng.random((9, m))
        resp /= resp.sum(axis=1, keepdims=True)
        phi = rng.standard_normal((9, d))
        posts = random_posteriors(rng, m, n_y)

        def data_term(resp_, phi_):
            stats = accumulate_stats(resp_, phi_)
            c, r = accumulators(stats, posts)
            from spldavb.vbpoint import _data_term
            return _data_term(stats.n_total, stats.s, c, r, model)

        single = data_term(resp, phi)
        double = data_term(np.vstack([resp, resp]), np.vstack([phi, phi]))
        assert double == pytest.approx(2.0 * single, rel=1e-12)


class TestMsteps:
    def test_mstep_v_solves_normal_equations(self):
        rng = np.random.default_rng(18)
        d, n_y = 4, 2
        c = rng.standard_normal((d, n_y + 1))
        a = rng.standard_normal((n_y + 1, n_y + 1))
        r = a @ a.T + np.eye(n_y + 1)
        c_d = rng.standard_normal((d, n_y + 1))
        b = rng.standard_normal((n_y + 1, n_y + 1))
        r_d = b @ b.T + np.eye(n_y + 1)
        eta = 0.6
        vt = mstep_V(c, r, c_d, r_d, eta)
        np.testing.assert_allclose(vt @ (r + eta * r_d), c + eta * c_d,
                                   atol=1e-10)

    def test_mstep_v_rejects_singular(self):
        with pytest.raises(np.linalg.LinAlgError, match="condition"):
            mstep_V(np.zeros((3, 2)), np.zeros((2, 2)),
                    np.zeros((3, 2)), np.zeros((2, 2)), 1.0)

    def test_mstep_w_recovers_sample_covariance(self):
        # With V = 0, one cluster and hard counts the update reduces to the
        # inverse of the biased sample covariance around mu.
        rng = np.random.default_rng(20)
        d, n = 3, 40
        phi = rng.standard_normal((n, d)) @ np.diag([1.0, 2.0, 0.5])
        mu = phi.mean(axis=0)
        model = SpldaModel(mu=mu, v=np.zeros((d, 2)), w=np.eye(d))
        resp = np.ones((n, 1))
        stats = center_stats(accumulate_stats(resp, phi), mu)
        posts = update_q_y(stats, model)
        c, r = accumulators(stats, posts)
        zero_c = np.zeros_like(c)
        zero_r = np.zeros_like(r)
        w = mstep_W(stats.s, np.zeros((d, d)), c + zero_c, r + zero_r,
                    model.vtilde, stats.n_total, 0.0, 1.0)
        cov = (phi - mu).T @ (phi - mu) / n
        np.testing.assert_allclose(w, inv_pd(cov), rtol=1e-9)

    def test_mstep_w_rejects_low_count(self):
        d = 4
        with pytest.raises(ValueError, match="degenerate"):
            mstep_W(np.eye(d), np.zeros((d, d)), np.zeros((d, 2)),
                    np.eye(2), np.zeros((d, 2)), 3.0, 0.0, 1.0)


class TestMstepTau0:
    def test_known_root(self):
        # for M = 2, psi(2) - psi(1) = 1, so g = -1 has the root tau0 = 1
        tau0 = mstep_tau0(np.array([-1.0, -1.0]), tau0_init=5.0)
        assert tau0 == pytest.approx(1.0, abs=1e-6)

    def test_matches_bisection_oracle(self):
        m, true = 5, 3.7
        g = digamma(true) - digamma(m * true)
        e_ln_pi = np.full(m, g)
        newton = mstep_tau0(e_ln_pi, tau0_init=0.5)
        bisect = brentq(lambda t: digamma(m * t) - digamma(t) + g, 1e-8, 1e6,
                        xtol=1e-12)
        assert newton == pytest.approx(bisect, rel=1e-8)
        assert newton == pytest.approx(true, rel=1e-8)

    def test_extreme_inits_agree(self):
        m, true = 3, 0.2
        g = digamma(true) - digamma(m * true)
        lo = mstep_tau0(np.full(m, g), tau0_init=1e-4)
        hi = mstep_tau0(np.full(m, g), tau0_init=1e4)
        assert lo == pytest.approx(hi, rel=1e-8)
        assert lo > 0

    def test_requires_two_clusters(self):
        with pytest.raises(ValueError, match="M >= 2"):
            mstep_tau0(np.array([-0.5]))


class TestMinDivergence:
    def test_standard_posterior_is_fixed_point(self):
        rng = np.random.default_rng(22)
        model = random_model(rng, 4, 2)
        posts = SpeakerPosteriors(ybar=np.zeros((5, 2)),
                                  prec=np.broadcast_to(np.eye(2), (5, 2, 2)).copy())
        posts_d = SpeakerPosteriors(ybar=np.zeros((2, 2)),
                                    prec=np.broadcast_to(np.eye(2), (2, 2, 2)).copy())
        new = min_divergence(posts, posts_d, model, eta=1.0)
        np.testing.assert_array_equal(new.mu, model.mu)
        np.testing.assert_array_equal(new.v, model.v)
        np.testing.assert_array_equal(new.w, model.w)

    def test_pure_translation(self):
        rng = np.random.default_rng(23)
        model = random_model(rng, 4, 2)
        shift = np.array([0.7, -1.2])
        posts = SpeakerPosteriors(
            ybar=np.tile(shift, (6, 1)),
            prec=np.broadcast_to(np.eye(2), (6, 2, 2)).copy())
        posts_d = SpeakerPosteriors(ybar=np.zeros((0, 2)),
                                    prec=np.zeros((0, 2, 2)))
        new = min_divergence(posts, posts_d, model, eta=1.0)
        np.testing.assert_allclose(new.mu, model.mu + model.v @ shift, atol=1e-12)
        np.testing.assert_allclose(new.v, model.v, atol=1e-12)

    def test_marginal_invariance(self):
        rng = np.random.default_rng(24)
        d, n_y = 5, 3
        model = random_model(rng, d, n_y)
        posts = random_posteriors(rng, 7, n_y)
        posts_d = random_posteriors(rng, 3, n_y)
        eta = 0.5
        new, (mu_y, t) = min_divergence(posts, posts_d, model, eta,
                                        with_transform=True)
        sigma_y = t @ t.T
        # marginal of old model under the generalized prior N(mu_y, Sigma_y)
        old_mean = model.mu + model.v @ mu_y
        old_cov = model.v @ sigma_y @ model.v.T + inv_pd(model.w)
        new_mean, new_cov = marginal_params(new)
        np.testing.assert_allclose(new_mean, old_mean, atol=1e-10)
        np.testing.assert_allclose(new_cov, old_cov, atol=1e-10)

    def test_posterior_standardization(self):
        rng = np.random.default_rng(25)
        n_y = 2
        posts = random_posteriors(rng, 20, n_y)
        posts_d = random_posteriors(rng, 0, n_y)
        model = random_model(rng, 4, n_y)
        _, (mu_y, t) = min_divergence(posts, posts_d, model, eta=1.0,
                                      with_transform=True)
        std = standardize_posteriors(posts, mu_y, t)
        # aggregate posterior becomes zero-mean with identity second moment
        np.testing.assert_allclose(std.ybar.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(std.e_yy().mean(axis=0), np.eye(n_y),
                                   atol=1e-10)


@settings(deadline=None, max_examples=30)
@given(st.integers(min_value=1, max_value=20),
       st.integers(min_value=1, max_value=5),
       st.integers(min_value=0, max_value=2**31 - 1))
def test_responsibilities_stay_row_stochastic(n, m, seed):
    rng = np.random.default_rng(seed)
    model = random_model(rng, 3, 2)
    posts = random_posteriors(rng, m, 2)
    dirichlet = DirichletPosterior(rng.random(m) + 0.1)
    phi = rng.standard_normal((n, 3))
    resp = update_q_theta(phi, posts, model, dirichlet)
    assert (resp.r >= 0).all()
    np.testing.assert_allclose(resp.r.sum(axis=1), 1.0, atol=1e-10)


@settings(deadline=None, max_examples=30)
@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_entropy_nonnegative(seed):
    rng = np.random.default_rng(seed)
    r = rng.random((6, 3))
    r /= r.sum(axis=1, keepdims=True)
    assert Responsibilities(r=r).entropy() >= 0.0
