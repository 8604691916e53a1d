"""Variational inference with point estimates of (mu, V, W).

Coordinate-ascent updates for q(Y), q(theta), q(pi), the full variational
lower bound with a per-term breakdown, the closed-form M-steps for [V|mu]
and W, the Newton solver for the Dirichlet parameter tau0, the minimum
divergence re-standardization and the deterministic-annealing (kappa)
variants of every update.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import digamma, gammaln, polygamma

from .linalg import inv_pd, logdet_pd, solve_pd, sym
from .model import SpldaModel, SuffStats

__all__ = [
    "Hyperparams",
    "SpeakerPosteriors",
    "Responsibilities",
    "DirichletPosterior",
    "update_q_y",
    "update_q_theta",
    "update_q_pi",
    "accumulators",
    "elbo_point",
    "mstep_V",
    "mstep_W",
    "mstep_tau0",
    "min_divergence",
]

LOG2PI = np.log(2.0 * np.pi)


@dataclass
class Hyperparams:
    """Fixed hyperparameters shared by both inference variants."""

    tau0: float = 1.0
    eta: float = 1.0
    kappa: float = 1.0
    # Bayesian-variant parameters (unused by the point variant).
    mu0: np.ndarray | None = None
    beta: np.ndarray | float | None = None
    a_alpha: float = 1e-3
    b_alpha: float = 1e-3

    def __post_init__(self):
        if not self.tau0 > 0:
            raise ValueError("tau0 must be > 0")
        if not 0 < self.eta <= 1:
            raise ValueError("eta must lie in (0, 1]")
        if not 0 < self.kappa <= 1:
            raise ValueError("kappa must lie in (0, 1]")


@dataclass
class SpeakerPosteriors:
    """Gaussian speaker-factor posteriors q(y_i) for a block of speakers.

    ``prec`` holds the untempered precisions L_i; with annealing the actual
    posterior covariance is ``(1/kappa) L_i^-1``.
    """

    ybar: np.ndarray  # (M, n_y)
    prec: np.ndarray  # (M, n_y, n_y)
    kappa: float = 1.0

    @property
    def m(self):
        return self.ybar.shape[0]

    @property
    def n_y(self):
        return self.ybar.shape[1]

    def cov(self):
        return np.linalg.inv(self.prec) / self.kappa

    def e_yy(self):
        """(M, n_y, n_y) second moments E[y y^T]."""
        return self.cov() + np.einsum("ma,mb->mab", self.ybar, self.ybar)

    def e_ytilde(self):
        """(M, n_y + 1) augmented means [ybar; 1]."""
        return np.hstack([self.ybar, np.ones((self.m, 1))])

    def e_yy_tilde(self):
        """(M, n_y+1, n_y+1) augmented second moments."""
        m, n_y = self.m, self.n_y
        out = np.empty((m, n_y + 1, n_y + 1))
        out[:, :n_y, :n_y] = self.e_yy()
        out[:, :n_y, n_y] = self.ybar
        out[:, n_y, :n_y] = self.ybar
        out[:, n_y, n_y] = 1.0
        return out

    def logdet_prec(self):
        return np.array([logdet_pd(p) for p in self.prec])


@dataclass
class Responsibilities:
    """Row-stochastic cluster responsibilities plus the raw log weights."""

    r: np.ndarray  # (N, M)
    log_rho: np.ndarray = field(repr=False, default=None)  # (N, M), unnormalized

    @property
    def counts(self):
        """Expected occupation counts E[N_i]."""
        return self.r.sum(axis=0)

    def entropy(self):
        """-sum_ji r_ji ln r_ji, with 0 ln 0 = 0."""
        r = self.r
        return float(-np.sum(np.where(r > 0, r * np.log(np.where(r > 0, r, 1.0)), 0.0)))


@dataclass
class DirichletPosterior:
    """q(pi) = Dir(tau) with the digamma expectation cached."""

    tau: np.ndarray

    def __post_init__(self):
        self.tau = np.asarray(self.tau, dtype=float)
        if (self.tau <= 0).any():
            raise ValueError("Dirichlet parameters must be positive")

    @property
    def e_ln_pi(self):
        return digamma(self.tau) - digamma(self.tau.sum())


def update_q_y(stats, model, kappa=1.0):
    """q(y_i) updates from (expected or hard) centered statistics.

    L_i = I + E[N_i] V^T W V,  ybar_i = L_i^-1 V^T W E[Fbar_i].
    """
    if stats.fbar is None:
        raise ValueError("stats must be centered (call center_stats first)")
    n_y = model.n_y
    wv = model.w @ model.v  # (d, n_y)
    g = sym(model.v.T @ wv)  # (n_y, n_y)
    prec = np.eye(n_y)[None, :, :] + stats.n[:, None, None] * g[None, :, :]
    rhs = stats.fbar @ wv  # (M, n_y)
    ybar = np.linalg.solve(prec, rhs[:, :, None])[:, :, 0]
    return SpeakerPosteriors(ybar=ybar, prec=prec, kappa=kappa)


def update_q_theta(phi, posteriors, model, dirichlet, kappa=1.0):
    """Responsibility update; computed in log space, kappa-tempered."""
    delta = phi - model.mu  # (N, d)
    wv = model.w @ model.v
    g = sym(model.v.T @ wv)
    quad = np.einsum("jd,de,je->j", delta, model.w, delta)  # (N,)
    cross = (delta @ wv) @ posteriors.ybar.T  # (N, M)
    tr_term = np.einsum("ab,mba->m", g, posteriors.e_yy())  # (M,)
    log_rho = (
        0.5 * (model.logdet_w() - model.d * LOG2PI)
        - 0.5 * quad[:, None]
        + cross
        - 0.5 * tr_term[None, :]
        + dirichlet.e_ln_pi[None, :]
    )
    return _normalize_log_rho(log_rho, kappa)


def _normalize_log_rho(log_rho, kappa):
    if not np.isfinite(log_rho.max(axis=1)).all():
        raise ValueError("degenerate model: a responsibility row is all -inf")
    z = log_rho if kappa == 1.0 else kappa * log_rho
    z_shift = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z_shift).sum(axis=1, keepdims=True))
    r = np.exp(z_shift - log_norm)
    return Responsibilities(r=r, log_rho=log_rho)


def update_q_pi(expected_counts, tau0, kappa=1.0):
    """Dirichlet update tau_i = E[N_i] + tau0 (kappa-annealed variant below).

    With annealing, tau_i = kappa (E[N_i] + tau0 - 1) + 1.  The kappa == 1
    branch is kept separate so the annealed code path is bit-identical to the
    standard one.
    """
    counts = np.asarray(expected_counts, dtype=float)
    if (counts < 0).any():
        raise ValueError("expected counts must be nonnegative")
    if kappa == 1.0:
        tau = counts + tau0
    else:
        tau = kappa * (counts + tau0 - 1.0) + 1.0
        if (tau <= 0).any():
            raise ValueError(
                "annealed tau non-positive; raise kappa or tau0"
            )
    return DirichletPosterior(tau=tau)


def accumulators(stats, posteriors):
    """Augmented accumulators (C, R) for the M-steps.

    C = sum_i E[F_i] E[ytilde_i]^T   (d, n_y+1)
    R = sum_i E[N_i] E[ytilde ytilde^T]   (n_y+1, n_y+1)
    """
    ytilde = posteriors.e_ytilde()
    c = stats.f.T @ ytilde
    r = np.einsum("m,mab->ab", stats.n, posteriors.e_yy_tilde())
    return c, sym(r)


def _data_term(n_total, s_global, c, r, model):
    vt = model.vtilde
    inner = s_global - 2.0 * c @ vt.T + vt @ r @ vt.T
    return 0.5 * n_total * (model.logdet_w() - model.d * LOG2PI) \
        - 0.5 * np.sum(model.w * inner)


def _y_prior_term(posteriors):
    rho = posteriors.e_yy().sum(axis=0)
    return -0.5 * posteriors.m * posteriors.n_y * LOG2PI - 0.5 * np.trace(rho)


def _y_entropy_term(posteriors):
    # E[ln q(Y)] (enters the bound with a minus sign)
    return -0.5 * posteriors.m * posteriors.n_y * (LOG2PI + 1.0) \
        + 0.5 * posteriors.logdet_prec().sum()


def _ln_dirichlet_c(tau):
    tau = np.atleast_1d(tau)
    return float(gammaln(tau.sum()) - gammaln(tau).sum())


def elbo_point(stats, stats_d, posteriors, posteriors_d, resp, dirichlet,
               model, hyper):
    """Variational lower bound for the point-estimate model.

    Returns ``(total, breakdown)`` where ``breakdown`` maps term names to
    values.  Defined for the untempered (kappa = 1) objective; the supervised
    terms enter unweighted (eta affects only parameter estimation).
    """
    m = dirichlet.tau.shape[0]
    e_ln_pi = dirichlet.e_ln_pi
    c, r = accumulators(stats, posteriors)
    c_d, r_d = accumulators(stats_d, posteriors_d)
    terms = {
        "lnP(Phi|Y,theta)": _data_term(stats.n_total, stats.s, c, r, model),
        "lnP(Y)": _y_prior_term(posteriors),
        "lnP(theta|pi)": float(stats.n @ e_ln_pi),
        "lnP(pi)": _ln_dirichlet_c(np.full(m, hyper.tau0))
        + (hyper.tau0 - 1.0) * e_ln_pi.sum(),
        "lnP(Phi_d|Y_d)": _data_term(stats_d.n_total, stats_d.s, c_d, r_d, model),
        "lnP(Y_d)": _y_prior_term(posteriors_d),
        "-lnq(Y)": -_y_entropy_term(posteriors),
        "-lnq(theta)": resp.entropy(),
        "-lnq(pi)": -(
            _ln_dirichlet_c(dirichlet.tau)
            + float((dirichlet.tau - 1.0) @ e_ln_pi)
        ),
        "-lnq(Y_d)": -_y_entropy_term(posteriors_d),
    }
    total = float(sum(terms.values()))
    return total, terms


def mstep_V(c, r, c_d, r_d, eta):
    """Closed-form update of the augmented [V | mu].

    Solves Vtilde (R + eta R_d) = (C + eta C_d) by a linear system.
    """
    c_p = c + eta * c_d
    r_p = sym(r + eta * r_d)
    cond = np.linalg.cond(r_p)
    if not np.isfinite(cond) or cond > 1e14:
        raise np.linalg.LinAlgError(
            f"weighted accumulator R' is singular (condition number {cond:.3e})"
        )
    return np.linalg.solve(r_p, c_p.T).T


def mstep_W(e_s, s_d, c_p, r_p, vtilde, e_n, n_d, eta):
    """Closed-form update of the within-class precision W.

    W^-1 = (K + K^T) / 2 / (E[N] + eta N_d) with
    K = E[S] + eta S_d - 2 C' Vtilde^T + Vtilde R' Vtilde^T.
    """
    d = e_s.shape[0]
    denom = e_n + eta * n_d
    if denom <= d:
        raise ValueError(
            f"E[N] + eta*N_d = {denom:.3g} <= d = {d}: W would be degenerate"
        )
    k = e_s + eta * s_d - 2.0 * c_p @ vtilde.T + vtilde @ r_p @ vtilde.T
    w_inv = sym(k) / denom
    return inv_pd(w_inv)


def mstep_tau0(e_ln_pi, tau0_init=1.0, tol=1e-10, max_iter=2000):
    """Newton update of tau0 in the log domain.

    Solves f(tau0) = psi(M tau0) - psi(tau0) + g = 0 with
    g = mean(E[ln pi_i]); the step uses the damped denominator
    tau0 (psi'(M tau0) - psi'(tau0)), which converges only linearly,
    hence the large iteration budget.
    """
    e_ln_pi = np.asarray(e_ln_pi, dtype=float)
    m = e_ln_pi.shape[0]
    if m < 2:
        raise ValueError("tau0 update needs M >= 2")
    g = float(e_ln_pi.mean())
    tau0 = float(tau0_init)
    best = (np.inf, tau0)

    def f(t):
        return digamma(m * t) - digamma(t) + g

    for _ in range(max_iter):
        ft = f(tau0)
        if abs(ft) < best[0]:
            best = (abs(ft), tau0)
        if abs(ft) < tol:
            return tau0
        denom = tau0 * (polygamma(1, m * tau0) - polygamma(1, tau0))
        step = -ft / denom
        step = np.clip(step, -10.0, 10.0)  # log-domain safeguard
        tau0 = tau0 * np.exp(step)
    warnings.warn(
        f"tau0 Newton did not reach |f| < {tol:g} in {max_iter} iterations "
        f"(best residual {best[0]:.3e})",
        RuntimeWarning,
    )
    return best[1]


def min_divergence(posteriors, posteriors_d, model, eta, with_transform=False):
    """Minimum-divergence re-standardization of the latent prior.

    Absorbs the aggregate posterior mean/covariance of the speaker factors
    into (mu, V) so that the prior stays N(0, I).  The i-vector marginal is
    left invariant.  With ``with_transform=True`` also returns ``(mu_y, t)``
    where ``t`` is the lower Cholesky factor of Sigma_y (used to transform
    the speaker posteriors in step).
    """
    m, m_d = posteriors.m, posteriors_d.m
    denom = m + eta * m_d
    mu_y = (posteriors.ybar.sum(axis=0) + eta * posteriors_d.ybar.sum(axis=0)) / denom
    rho = posteriors.e_yy().sum(axis=0) + eta * posteriors_d.e_yy().sum(axis=0)
    sigma_y = sym(rho / denom - np.outer(mu_y, mu_y))
    t = np.linalg.cholesky(sigma_y)  # raises if Sigma_y is not PD
    new = SpldaModel(mu=model.mu + model.v @ mu_y, v=model.v @ t, w=model.w)
    if with_transform:
        return new, (mu_y, t)
    return new


def standardize_posteriors(posteriors, mu_y, t):
    """Re-express speaker posteriors in the transformed latent coordinates.

    y' = T^-1 (y - mu_y); precision transforms as L' = T^T L T, which keeps
    the data-dependent part of the bound invariant.
    """
    t_inv = np.linalg.inv(t)
    ybar = (posteriors.ybar - mu_y) @ t_inv.T
    prec = np.einsum("ar,mab,bs->mrs", t, posteriors.prec, t)
    return SpeakerPosteriors(ybar=ybar, prec=prec, kappa=posteriors.kappa)
