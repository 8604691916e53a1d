"""Fully Bayesian variant: posteriors over the model parameters themselves.

Priors: hierarchical Gaussian-Gamma over the eigenvoice columns (an
automatic-relevance prior that can switch columns off), Gaussian over the
mean, and a non-informative (improper) prior over the within-class
precision.  The augmented matrix [V | mu] gets row-wise Gaussian
posteriors, the column scales Gamma posteriors, and W a Wishart posterior.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import digamma, gammaln, multigammaln, polygamma

from .linalg import inv_pd, logdet_pd, sym
from .vbpoint import (
    LOG2PI,
    DirichletPosterior,
    Responsibilities,
    SpeakerPosteriors,
    _ln_dirichlet_c,
    _normalize_log_rho,
    _y_entropy_term,
    _y_prior_term,
)

__all__ = [
    "RowPosteriors",
    "AlphaPosterior",
    "WishartPosterior",
    "update_q_y_bayes",
    "update_q_theta_bayes",
    "update_q_vtilde_rows",
    "update_q_alpha",
    "update_q_wishart",
    "elbo_bayes",
    "optimize_hyper_alpha",
    "optimize_hyper_mu",
]


@dataclass
class RowPosteriors:
    """Row-wise Gaussian posteriors over the augmented [V | mu].

    mean : (d, n_y+1) posterior row means (assembled E[Vtilde])
    cov  : (d, n_y+1, n_y+1) posterior row covariances
    prec : optional (d, n_y+1, n_y+1) untempered precisions (for entropies)
    """

    mean: np.ndarray
    cov: np.ndarray
    prec: np.ndarray | None = None

    @classmethod
    def point_mass(cls, vtilde):
        vtilde = np.asarray(vtilde, dtype=float)
        d, k = vtilde.shape
        return cls(mean=vtilde.copy(), cov=np.zeros((d, k, k)))

    @property
    def d(self):
        return self.mean.shape[0]

    @property
    def n_y(self):
        return self.mean.shape[1] - 1

    @property
    def vbar(self):
        return self.mean[:, : self.n_y]

    @property
    def mubar(self):
        return self.mean[:, self.n_y]

    def e_vq_vq(self):
        """(n_y,) expectations E[v_q^T v_q] per eigenvoice column."""
        n_y = self.n_y
        diag_cov = np.einsum("rqq->rq", self.cov[:, :n_y, :n_y])
        return diag_cov.sum(axis=0) + (self.vbar ** 2).sum(axis=0)

    def sigma_mu(self):
        """(d,) posterior variances of the mean components."""
        return self.cov[:, self.n_y, self.n_y]

    def logdet_prec(self):
        if self.prec is None:
            return -np.array([logdet_pd(c) for c in self.cov])
        return np.array([logdet_pd(p) for p in self.prec])


@dataclass
class AlphaPosterior:
    """Gamma posteriors over the column-scale hyperparameters alpha_q."""

    a_prime: float
    b_prime: np.ndarray

    def __post_init__(self):
        self.b_prime = np.asarray(self.b_prime, dtype=float)
        if self.a_prime <= 0 or (self.b_prime <= 0).any():
            raise ValueError("Gamma parameters must be positive")

    @property
    def e_alpha(self):
        return self.a_prime / self.b_prime

    @property
    def e_ln_alpha(self):
        return digamma(self.a_prime) - np.log(self.b_prime)


class WishartPosterior:
    """q(W) = Wishart(scale, dof) with E[W] and E[ln|W|] cached.

    Constructed either from an inverse-scale accumulator K (``from_update``)
    or as a point mass pinned at a given W (degenerate-reduction checks).
    """

    def __init__(self, e_w, e_ln_w, k=None, dof=None, kappa=1.0):
        self.e_w = sym(np.asarray(e_w, dtype=float))
        self.e_ln_w = float(e_ln_w)
        self.k = k
        self.dof = dof
        self.kappa = kappa

    @classmethod
    def from_update(cls, k, dof, kappa=1.0):
        k = sym(np.asarray(k, dtype=float))
        d = k.shape[0]
        if kappa == 1.0:
            dof_eff = float(dof)
            if dof_eff <= d:
                raise ValueError(
                    f"Wishart dof N' = {dof_eff:.3g} <= d = {d}; "
                    "more (weighted) data is needed for a valid q(W)"
                )
            scale = inv_pd(k)
        else:
            dof_eff = kappa * (dof - d - 1.0) + d + 1.0
            if kappa * (dof - d - 1.0) + 1.0 <= 0:
                raise ValueError(
                    f"annealed Wishart dof condition violated "
                    f"(kappa={kappa:.3g}, N'={dof:.3g}, d={d}); raise kappa"
                )
            scale = inv_pd(k) / kappa
        e_w = dof_eff * scale
        e_ln_w = (
            digamma(0.5 * (dof_eff + 1.0 - np.arange(1, d + 1))).sum()
            + d * np.log(2.0)
            + logdet_pd(scale)
        )
        self = cls(e_w=e_w, e_ln_w=e_ln_w, k=k, dof=float(dof), kappa=kappa)
        self._dof_eff = dof_eff
        self._scale = scale
        return self

    @classmethod
    def point_mass(cls, w):
        w = sym(np.asarray(w, dtype=float))
        return cls(e_w=w, e_ln_w=logdet_pd(w))

    @property
    def d(self):
        return self.e_w.shape[0]


def e_vt_w_vt(rowpost, wpost):
    """E[Vtilde^T W Vtilde] = sum_r wbar_rr Sigma_r + Vtbar^T Wbar Vtbar."""
    wbar = wpost.e_w
    out = np.einsum("r,rab->ab", np.diag(wbar), rowpost.cov)
    out += rowpost.mean.T @ wbar @ rowpost.mean
    return sym(out)


def e_v_w_v(rowpost, wpost):
    """E[V^T W V] (top-left block of the augmented expectation)."""
    return e_vt_w_vt(rowpost, wpost)[: rowpost.n_y, : rowpost.n_y]


def e_v_w_mu(rowpost, wpost):
    """E[V^T W mu] (last column of the augmented expectation)."""
    return e_vt_w_vt(rowpost, wpost)[: rowpost.n_y, rowpost.n_y]


def e_vt_r_vt(rowpost, r):
    """E[Vtilde R Vtilde^T] = Vtbar R Vtbar^T + diag(rho).

    rho_r collects the Hadamard contraction of R with row r's covariance.
    """
    rho = np.einsum("ab,rab->r", r, rowpost.cov)
    return sym(rowpost.mean @ r @ rowpost.mean.T) + np.diag(rho)


def update_q_y_bayes(stats, rowpost, wpost, kappa=1.0):
    """q(y_i) with expectations over the parameter posteriors.

    L_i = I + E[N_i] E[V^T W V];
    ybar_i = L_i^-1 (E[V]^T E[W] E[F_i] - E[N_i] E[V^T W mu]).

    ``stats`` carries the raw (uncentered) first-order sums.
    """
    n_y = rowpost.n_y
    evv = e_v_w_v(rowpost, wpost)
    evwmu = e_v_w_mu(rowpost, wpost)
    prec = np.eye(n_y)[None, :, :] + stats.n[:, None, None] * evv[None, :, :]
    rhs = stats.f @ (wpost.e_w @ rowpost.vbar) - np.outer(stats.n, evwmu)
    ybar = np.linalg.solve(prec, rhs[:, :, None])[:, :, 0]
    return SpeakerPosteriors(ybar=ybar, prec=prec, kappa=kappa)


def update_q_theta_bayes(phi, posteriors, rowpost, wpost, dirichlet, kappa=1.0):
    """Responsibility update with expected parameters."""
    d = rowpost.d
    wbar = wpost.e_w
    ytilde = posteriors.e_ytilde()  # (M, n_y+1)
    quad_phi = np.einsum("jd,de,je->j", phi, wbar, phi)  # (N,)
    cross = (phi @ (wbar @ rowpost.mean)) @ ytilde.T  # (N, M)
    evtwvt = e_vt_w_vt(rowpost, wpost)
    tr_term = np.einsum("ab,mba->m", evtwvt, posteriors.e_yy_tilde())  # (M,)
    log_rho = (
        0.5 * wpost.e_ln_w
        - 0.5 * d * LOG2PI
        - 0.5 * quad_phi[:, None]
        + cross
        - 0.5 * tr_term[None, :]
        + dirichlet.e_ln_pi[None, :]
    )
    return _normalize_log_rho(log_rho, kappa)


def update_q_vtilde_rows(c_p, r_p, wpost, alphapost, hyper, rowpost, kappa=1.0):
    """One Gauss-Seidel sweep over the row posteriors of [V | mu].

    c_p, r_p : eta-weighted accumulators C', R'
    Rows are updated in ascending order using the latest neighbor means;
    each row update is exact coordinate ascent with the others held fixed.
    """
    d = rowpost.d
    n_y = rowpost.n_y
    wbar = wpost.e_w
    beta = np.broadcast_to(np.asarray(hyper.beta, dtype=float), (d,))
    mu0 = np.zeros(d) if hyper.mu0 is None else np.asarray(hyper.mu0, dtype=float)
    mean = rowpost.mean.copy()
    cov = np.empty_like(rowpost.cov)
    prec = np.empty_like(rowpost.cov)
    for r in range(d):
        alpha_aug = np.append(alphapost.e_alpha, beta[r])
        l_r = np.diag(alpha_aug) + wbar[r, r] * r_p
        # sum_s wbar_rs (C_s^T - R' vbar_s) folded back to full sums:
        c_w = c_p.T @ wbar[r]  # (n_y+1,)
        v_w = mean.T @ wbar[r]
        rhs = c_w - r_p @ v_w + wbar[r, r] * (r_p @ mean[r])
        rhs[n_y] += beta[r] * mu0[r]
        try:
            np.linalg.cholesky(sym(l_r))
        except np.linalg.LinAlgError:
            raise np.linalg.LinAlgError(
                f"row {r} posterior precision is singular"
            ) from None
        mean[r] = np.linalg.solve(l_r, rhs)
        cov[r] = np.linalg.inv(l_r) / kappa
        prec[r] = sym(l_r)
    return RowPosteriors(mean=mean, cov=np.array([sym(c) for c in cov]), prec=prec)


def update_q_alpha(rowpost, hyper, kappa=1.0):
    """Gamma posterior per eigenvoice column.

    a' = a + d/2, b'_q = b + E[v_q^T v_q]/2 (kappa-annealed variants keep the
    kappa == 1 path bit-identical).
    """
    d = rowpost.d
    e_vv = rowpost.e_vq_vq()
    if kappa == 1.0:
        a_prime = hyper.a_alpha + 0.5 * d
        b_prime = hyper.b_alpha + 0.5 * e_vv
    else:
        a_prime = kappa * (hyper.a_alpha + 0.5 * d - 1.0) + 1.0
        b_prime = kappa * (hyper.b_alpha + 0.5 * e_vv)
    return AlphaPosterior(a_prime=a_prime, b_prime=b_prime)


def update_q_wishart(e_s, s_d, c_p, r_p, rowpost, e_n, n_d, eta, kappa=1.0):
    """Wishart posterior over W from the eta-weighted accumulators."""
    vtbar = rowpost.mean
    k = e_s + eta * s_d - c_p @ vtbar.T - vtbar @ c_p.T + e_vt_r_vt(rowpost, r_p)
    dof = e_n + eta * n_d
    return WishartPosterior.from_update(sym(k), dof, kappa=kappa)


def _data_term_bayes(n_total, s_global, c, r, rowpost, wpost):
    d = rowpost.d
    inner = s_global - 2.0 * c @ rowpost.mean.T + e_vt_r_vt(rowpost, r)
    return 0.5 * n_total * (wpost.e_ln_w - d * LOG2PI) \
        - 0.5 * np.sum(wpost.e_w * inner)


def _ln_wishart_b(scale, dof):
    """ln B(scale, dof), the Wishart normalizer."""
    d = scale.shape[0]
    return float(
        -0.5 * dof * logdet_pd(scale)
        - 0.5 * dof * d * np.log(2.0)
        - multigammaln(0.5 * dof, d)
    )


def elbo_bayes(stats, stats_d, posteriors, posteriors_d, resp, dirichlet,
               rowpost, alphapost, wpost, hyper):
    """Variational lower bound of the Bayesian variant, with breakdown.

    The supervised data and speaker-factor terms carry the weight eta; the
    improper-prior constant of P(W) is dropped (additive constant).
    """
    from .vbpoint import accumulators

    m = dirichlet.tau.shape[0]
    n_y = rowpost.n_y
    d = rowpost.d
    eta = hyper.eta
    e_ln_pi = dirichlet.e_ln_pi
    c, r = accumulators(stats, posteriors)
    c_d, r_d = accumulators(stats_d, posteriors_d)
    e_vv = rowpost.e_vq_vq()
    beta = np.broadcast_to(np.asarray(hyper.beta, dtype=float), (d,))
    mu0 = np.zeros(d) if hyper.mu0 is None else np.asarray(hyper.mu0, dtype=float)
    mubar = rowpost.mubar
    mu_quad = rowpost.sigma_mu() + mubar ** 2 - 2.0 * mu0 * mubar + mu0 ** 2

    if wpost.k is None or wpost.dof is None:
        raise ValueError("elbo_bayes needs a proper Wishart posterior (invalid dof)")
    dof = wpost.dof
    scale = inv_pd(wpost.k)

    terms = {
        "lnP(Phi|Y,theta)": _data_term_bayes(
            stats.n_total, stats.s, c, r, rowpost, wpost),
        "lnP(Y)": _y_prior_term(posteriors),
        "lnP(theta|pi)": float(stats.n @ e_ln_pi),
        "lnP(pi)": _ln_dirichlet_c(np.full(m, hyper.tau0))
        + (hyper.tau0 - 1.0) * e_ln_pi.sum(),
        "lnP(V|alpha)": -0.5 * n_y * d * LOG2PI
        + 0.5 * d * alphapost.e_ln_alpha.sum()
        - 0.5 * float(alphapost.e_alpha @ e_vv),
        "lnP(alpha)": n_y * (hyper.a_alpha * np.log(hyper.b_alpha)
                             - gammaln(hyper.a_alpha))
        + (hyper.a_alpha - 1.0) * alphapost.e_ln_alpha.sum()
        - hyper.b_alpha * alphapost.e_alpha.sum(),
        "lnP(mu)": -0.5 * d * LOG2PI + 0.5 * np.log(beta).sum()
        - 0.5 * float(beta @ mu_quad),
        "lnP(W)": -0.5 * (d + 1.0) * wpost.e_ln_w,
        "eta*lnP(Phi_d|Y_d)": eta * _data_term_bayes(
            stats_d.n_total, stats_d.s, c_d, r_d, rowpost, wpost),
        "eta*lnP(Y_d)": eta * _y_prior_term(posteriors_d),
        "-lnq(Y)": -_y_entropy_term(posteriors),
        "-lnq(theta)": resp.entropy(),
        "-lnq(pi)": -(
            _ln_dirichlet_c(dirichlet.tau)
            + float((dirichlet.tau - 1.0) @ e_ln_pi)
        ),
        "-lnq(Vtilde)": 0.5 * d * (n_y + 1.0) * (LOG2PI + 1.0)
        - 0.5 * rowpost.logdet_prec().sum(),
        "-lnq(alpha)": -(
            n_y * ((alphapost.a_prime - 1.0) * digamma(alphapost.a_prime)
                   - alphapost.a_prime - gammaln(alphapost.a_prime))
            + np.log(alphapost.b_prime).sum()
        ),
        "-lnq(W)": -(
            _ln_wishart_b(scale, dof)
            + 0.5 * (dof - d - 1.0) * wpost.e_ln_w
            - 0.5 * dof * d
        ),
        "-eta*lnq(Y_d)": -eta * _y_entropy_term(posteriors_d),
    }
    total = float(sum(terms.values()))
    return total, terms


def optimize_hyper_alpha(alphapost, a_init=1.0, tol=1e-10, max_iter=100,
                         a_min=1e-6, a_max=1e6):
    """Empirical-Bayes update of the Gamma hyperparameters (a, b).

    Moment-matching Newton iteration in the log domain:
    f(a) = psi(a) - ln a + ln(mean E[alpha]) - mean E[ln alpha] = 0,
    then b = a / mean E[alpha].
    """
    c = float(alphapost.e_ln_alpha.mean())
    d_mom = float(alphapost.e_alpha.mean())
    gap = np.log(d_mom) - c
    a = float(np.clip(a_init, a_min, a_max))
    if gap <= 0:
        # Degenerate moment pair (zero-variance limit): a -> infinity.
        warnings.warn(
            "E[ln alpha] >= ln E[alpha]: clamping shape at a_max", RuntimeWarning)
        return a_max, a_max / d_mom
    best = (np.inf, a)
    for _ in range(max_iter):
        fa = digamma(a) - np.log(a) + gap
        if abs(fa) < best[0]:
            best = (abs(fa), a)
        if abs(fa) < tol:
            return a, a / d_mom
        denom = polygamma(1, a) * a - 1.0
        step = np.clip(-fa / denom, -10.0, 10.0)
        a = float(np.clip(a * np.exp(step), a_min, a_max))
        if a in (a_min, a_max):
            warnings.warn("hyper-alpha Newton hit the clamp boundary", RuntimeWarning)
            return a, a / d_mom
    warnings.warn(
        f"hyper-alpha Newton did not converge (best residual {best[0]:.3e})",
        RuntimeWarning,
    )
    return best[1], best[1] / d_mom


def optimize_hyper_mu(rowpost, mu0=None, isotropic=False, beta_max=1e8):
    """Empirical-Bayes update of (mu0, beta) for the mean prior.

    mu0 defaults to the posterior mean; with that substitution
    beta_r^-1 = Sigma_mu_r.  Isotropic mode averages the inverse over rows.
    """
    mubar = rowpost.mubar
    if mu0 is None:
        mu0 = mubar.copy()
    else:
        mu0 = np.asarray(mu0, dtype=float)
    beta_inv = rowpost.sigma_mu() + mubar ** 2 - 2.0 * mu0 * mubar + mu0 ** 2
    if isotropic:
        beta = min(1.0 / max(float(beta_inv.mean()), 1.0 / beta_max), beta_max)
        return mu0, float(beta)
    beta = 1.0 / np.maximum(beta_inv, 1.0 / beta_max)
    return mu0, beta
