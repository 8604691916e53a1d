"""Synthetic data generation and verification scoring for the SPLDA model."""

from dataclasses import dataclass

import numpy as np

from .linalg import inv_pd, logdet_pd, sym
from .model import Dataset, SpldaModel

__all__ = ["SynthSpec", "generate", "random_model", "pairwise_llr", "pairwise_llr_matrix"]


@dataclass
class SynthSpec:
    """Recipe for a ground-truth synthetic dataset.

    vectors-per-speaker may be a fixed int or an inclusive (low, high) range;
    ``eigenvoice_scale / noise_scale >= 5`` gives the easy-separation regime.
    """

    d: int
    n_y: int
    m_true: int
    per_speaker: int | tuple[int, int]
    eigenvoice_scale: float = 1.0
    noise_scale: float = 1.0
    model: SpldaModel | None = None
    seed: int = 0

    def __post_init__(self):
        if min(self.d, self.n_y, self.m_true) < 1:
            raise ValueError("all sizes must be >= 1")
        if self.eigenvoice_scale <= 0 or self.noise_scale <= 0:
            raise ValueError("scales must be > 0")


def random_model(d, n_y, eigenvoice_scale, noise_scale, rng):
    """Random SPLDA model with controllable speaker/noise scales."""
    mu = rng.standard_normal(d)
    v = eigenvoice_scale * rng.standard_normal((d, n_y)) / np.sqrt(n_y)
    w = np.eye(d) / noise_scale ** 2
    return SpldaModel(mu=mu, v=v, w=w)


def generate(spec):
    """Sample (phi, labels, model) from the generative model.

    Returns ``(phi, labels, model)`` where ``phi`` is (N, d) and ``labels``
    assigns each row to one of ``m_true`` speakers.  Reproducible by seed.
    """
    rng = np.random.default_rng(spec.seed)
    model = spec.model
    if model is None:
        model = random_model(spec.d, spec.n_y, spec.eigenvoice_scale,
                             spec.noise_scale, rng)
    if isinstance(spec.per_speaker, tuple):
        counts = rng.integers(spec.per_speaker[0], spec.per_speaker[1] + 1,
                              size=spec.m_true)
    else:
        counts = np.full(spec.m_true, spec.per_speaker)
    noise_chol = np.linalg.cholesky(inv_pd(model.w))
    phis, labels = [], []
    for i in range(spec.m_true):
        y = rng.standard_normal(model.n_y)
        eps = rng.standard_normal((counts[i], model.d)) @ noise_chol.T
        phis.append(model.mu + y @ model.v.T + eps)
        labels.extend([i] * counts[i])
    return np.vstack(phis), np.array(labels, dtype=int), model


def split_dataset(phi, labels, sup_fraction, seed=0):
    """Split synthetic speakers into supervised and unsupervised subsets."""
    rng = np.random.default_rng(seed)
    speakers = np.unique(labels)
    n_sup = max(1, int(round(sup_fraction * speakers.size)))
    sup_spk = set(rng.choice(speakers, size=n_sup, replace=False).tolist())
    sup_mask = np.array([l in sup_spk for l in labels])
    sup_labels_raw = labels[sup_mask]
    remap = {s: i for i, s in enumerate(np.unique(sup_labels_raw))}
    labels_d = np.array([remap[l] for l in sup_labels_raw], dtype=int)
    dataset = Dataset(phi=phi[~sup_mask], phi_d=phi[sup_mask], labels_d=labels_d)
    return dataset, labels[~sup_mask]


def _gauss_logpdf(x, mean, cov):
    diff = np.atleast_2d(x - mean)
    k = diff.shape[1]
    chol = np.linalg.cholesky(sym(cov))
    z = np.linalg.solve(chol, diff.T)
    out = -0.5 * (z ** 2).sum(axis=0) - 0.5 * k * np.log(2 * np.pi) \
        - np.log(np.diag(chol)).sum()
    return out if out.size > 1 else float(out[0])


def pairwise_llr(model, phi_a, phi_b):
    """Same-speaker vs independent-speakers log-likelihood ratio.

    ln p(a, b | same) - ln p(a) p(b); the two-cover verification score of
    the point model.
    """
    vv = model.v @ model.v.T
    w_inv = inv_pd(model.w)
    cov1 = vv + w_inv
    d = model.d
    joint_cov = np.block([[cov1, vv], [vv, cov1]])
    joint_mean = np.concatenate([model.mu, model.mu])
    same = _gauss_logpdf(np.concatenate([phi_a, phi_b]), joint_mean, joint_cov)
    lone = _gauss_logpdf(phi_a, model.mu, cov1) + _gauss_logpdf(phi_b, model.mu, cov1)
    return float(same - lone)


def pairwise_llr_matrix(model, phi):
    """(N, N) matrix of pairwise same-speaker scores (vectorized)."""
    n = phi.shape[0]
    vv = model.v @ model.v.T
    w_inv = inv_pd(model.w)
    cov1 = vv + w_inv
    # Decompose the joint density: p(a,b|same)/p(a)p(b) depends on the pair
    # only through a quadratic form; evaluate via the conditional Gaussian
    # p(b | a, same) / p(b).
    delta = phi - model.mu
    gain = vv @ inv_pd(cov1)  # regression of b on a under the same-speaker model
    cond_cov = sym(cov1 - gain @ vv)
    cond_chol = np.linalg.cholesky(cond_cov)
    marg_chol = np.linalg.cholesky(sym(cov1))
    logdet_cond = 2 * np.log(np.diag(cond_chol)).sum()
    logdet_marg = 2 * np.log(np.diag(marg_chol)).sum()
    cond_prec = inv_pd(cond_cov)
    marg_prec = inv_pd(cov1)
    mean_b = delta @ gain.T  # (N, d) conditional means given each a
    out = np.empty((n, n))
    for a in range(n):
        diff = delta - mean_b[a]
        q_cond = np.einsum("jd,de,je->j", diff, cond_prec, diff)
        q_marg = np.einsum("jd,de,je->j", delta, marg_prec, delta)
        out[a] = -0.5 * (logdet_cond - logdet_marg) - 0.5 * (q_cond - q_marg)
    return 0.5 * (out + out.T)
