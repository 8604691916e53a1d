"""Full adaptation runs: initialization, annealing schedules, speaker-count
heuristics (pruning/merging), the VB+sampling hybrid and supervised
maximum-likelihood training of the initial model.
"""

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.cluster.hierarchy
import scipy.spatial.distance

from . import vbbayes, vbpoint
from .model import SpldaModel, SuffStats, accumulate_stats, center_stats
from .synth import pairwise_llr_matrix
from .vbpoint import Hyperparams, Responsibilities, SpeakerPosteriors

__all__ = [
    "RunConfig",
    "RunReport",
    "init_responsibilities",
    "prune_and_merge",
    "run_adaptation",
    "sampled_statistics",
    "sample_elbos",
    "sweep_m",
    "train_supervised",
]


@dataclass
class RunConfig:
    """Knobs of one adaptation run.  Defaults follow the library's policy
    values; every heuristic constant is configurable."""

    m_init: int = 1
    variant: str = "point"  # "point" | "bayes"
    init_method: str = "ahc"  # ahc | random_y | oracle | uniform_pi
    oracle_labels: np.ndarray | None = None
    anneal: bool = False
    kappa0: float = 0.2
    kappa_growth: float = 1.25
    prune_merge: bool = False
    prune_threshold: float = 0.5
    merge_threshold: float = 0.95
    prune_every: int = 5
    elbo_tol: float = 1e-7
    max_iter: int = 200
    eta: float = 1.0
    tau0: float = 1.0
    do_msteps: bool = True
    min_div: bool = True
    sampler_k: int = 0  # 0 = off
    sampler_strategy: str = "average_accumulators"  # or "best_sample"
    hyper_opt_tau0: bool = False
    hyper_opt_alpha: bool = False
    hyper_opt_mu: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.m_init < 1:
            raise ValueError("m_init must be >= 1")
        if not 0 < self.kappa0 <= 1:
            raise ValueError("kappa0 must lie in (0, 1]")
        if self.kappa_growth < 1:
            raise ValueError("kappa growth factor must be >= 1")
        if self.prune_threshold < 0 or self.merge_threshold < 0:
            raise ValueError("thresholds must be >= 0")
        if self.variant not in ("point", "bayes"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.sampler_strategy not in ("best_sample", "average_accumulators"):
            raise ValueError(f"unknown sampler strategy {self.sampler_strategy!r}")


@dataclass
class RunReport:
    elbo_trace: list = field(default_factory=list)
    m_trace: list = field(default_factory=list)
    kappa_trace: list = field(default_factory=list)
    labels: np.ndarray | None = None
    model: SpldaModel | None = None
    elbo_terms: dict | None = None
    diagnostics: list = field(default_factory=list)
    converged: bool = False
    bayes_state: dict | None = None


def _one_hot(labels, m):
    r = np.zeros((labels.shape[0], m))
    r[np.arange(labels.shape[0]), labels] = 1.0
    return r


def init_responsibilities(dataset, model, config):
    """Initial q(theta) for the unsupervised set, per the configured method."""
    phi = dataset.phi
    n, m = phi.shape[0], config.m_init
    rng = np.random.default_rng(config.seed)
    if config.init_method == "uniform_pi":
        return Responsibilities(r=np.full((n, m), 1.0 / m))
    if config.init_method == "oracle":
        if config.oracle_labels is None:
            raise ValueError("oracle init requested without oracle_labels")
        labels = np.asarray(config.oracle_labels, dtype=int)
        return Responsibilities(r=_one_hot(labels, max(m, labels.max() + 1)))
    if config.init_method == "random_y":
        ybar = rng.standard_normal((m, model.n_y))
        posts = SpeakerPosteriors(
            ybar=ybar, prec=np.broadcast_to(np.eye(model.n_y), (m, model.n_y, model.n_y)).copy())
        dirichlet = vbpoint.update_q_pi(np.full(m, n / m), config.tau0)
        return vbpoint.update_q_theta(phi, posts, model, dirichlet)
    if config.init_method == "ahc":
        scores = pairwise_llr_matrix(model, phi)
        dist = scores.max() - scores
        np.fill_diagonal(dist, 0.0)
        condensed = scipy.spatial.distance.squareform(dist, checks=False)
        link = scipy.cluster.hierarchy.linkage(condensed, method="average")
        labels = scipy.cluster.hierarchy.fcluster(link, t=m, criterion="maxclust") - 1
        return Responsibilities(r=_one_hot(labels, m))
    raise ValueError(f"unknown init method {config.init_method!r}")


def sampled_statistics(resp, phi, k, seed=0, with_first_order=True):
    """Draw ``k`` hard assignments from q(theta) and accumulate hard stats.

    Returns ``(counts, fsums)`` with counts (k, M) and fsums (k, M, d) or
    None.  Every i-vector belongs to exactly one speaker per sample.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    r = resp.r
    n, m = r.shape
    rng = np.random.default_rng(seed)
    cum = np.cumsum(r, axis=1)
    cum[:, -1] = 1.0  # guard against accumulation shortfall
    u = rng.random((k, n))
    assign = (u[:, :, None] > cum[None, :, :]).sum(axis=2)
    counts = np.zeros((k, m))
    fsums = np.zeros((k, m, phi.shape[1])) if with_first_order else None
    for j in range(k):
        counts[j] = np.bincount(assign[j], minlength=m)
        if with_first_order:
            np.add.at(fsums[j], assign[j], phi)
    return counts, fsums


def sample_elbos(counts, fsums, phi, model, tau0):
    """Point-variant lower bound of each hard sample (used by best_sample)."""
    s_global = phi.T @ phi
    n = phi.shape[0]
    elbos = np.empty(counts.shape[0])
    for j in range(counts.shape[0]):
        stats = center_stats(
            SuffStats(n=counts[j], f=fsums[j], s=s_global), model.mu)
        posts = vbpoint.update_q_y(stats, model)
        dirichlet = vbpoint.update_q_pi(counts[j], tau0)
        # Hard assignment: q(theta) entropy is zero.
        resp = _hard_resp_from_counts(counts[j], n)
        stats_d = center_stats(
            SuffStats(n=np.zeros(0), f=np.zeros((0, model.d)),
                      s=np.zeros((model.d, model.d))), model.mu)
        posts_d = SpeakerPosteriors(
            ybar=np.zeros((0, model.n_y)),
            prec=np.zeros((0, model.n_y, model.n_y)))
        elbo, _ = vbpoint.elbo_point(stats, stats_d, posts, posts_d, resp,
                                     dirichlet, model, Hyperparams(tau0=tau0))
        elbos[j] = elbo
    return elbos


def _hard_resp_from_counts(counts, n):
    # Entropy of a hard assignment is zero; the ELBO only needs that and the
    # per-speaker counts, so any one-hot matrix with these column sums works.
    m = counts.shape[0]
    r = np.zeros((n, m))
    idx = 0
    for i, c in enumerate(np.round(counts).astype(int)):
        r[idx:idx + c, i] = 1.0
        idx += c
    return Responsibilities(r=r)


def _merge_pairs(r, threshold, tried):
    """Column pairs with cosine above ``threshold``, best first."""
    norms = np.linalg.norm(r, axis=0)
    norms = np.where(norms > 0, norms, 1.0)
    cos = (r.T @ r) / np.outer(norms, norms)
    pairs = []
    m = r.shape[1]
    for i in range(m):
        for j in range(i + 1, m):
            if cos[i, j] > threshold:
                pairs.append((cos[i, j], i, j))
    pairs.sort(reverse=True)
    return [(i, j) for _, i, j in pairs if frozenset((i, j)) not in tried]


def prune_and_merge(resp, config, refresh, current_elbo, extra_pairs=()):
    """Speaker-count heuristics: drop empty clusters, merge duplicates.

    ``refresh(r)`` must run one VB sweep from responsibilities ``r`` and
    return ``(elbo, state)``.  Candidate restructures are gated one at a
    time: each is kept only if its refreshed bound does not drop more than
    ``elbo_tol`` relative to the refreshed bound of the current structure
    (both sweeps run under the same model, so the comparison is fair even
    right after an M-step).

    ``extra_pairs`` adds merge candidates beyond the column-cosine rule
    (column-index pairs, e.g. clusters with near-identical speaker
    posteriors); they pass through the same ELBO gate.
    """
    r = resp.r
    counts = r.sum(axis=0)
    keep = counts >= config.prune_threshold
    if not keep.any():
        raise ValueError("prune threshold removed every cluster; lower it")
    have_prune = bool((~keep).any())
    if not have_prune and not extra_pairs \
            and not _merge_pairs(r, config.merge_threshold, set()):
        return resp, current_elbo, None, False

    cur = r
    cur_elbo, cur_state = refresh(cur)
    changed = False

    if have_prune:
        cand = cur[:, keep]
        cand = cand / cand.sum(axis=1, keepdims=True)
        elbo2, state2 = refresh(cand)
        if elbo2 >= cur_elbo - config.elbo_tol * max(1.0, abs(cur_elbo)):
            cur, cur_elbo, cur_state = cand, elbo2, state2
            changed = True

    # Greedy pairwise merging; column ids survive index shifts so a
    # rejected pair is not retried within this call.  Ids equal the original
    # column indices until a merge mints a fresh id, so ``extra_pairs``
    # stays valid as long as both of its columns are unmerged.
    ids = list(range(r.shape[1]))
    if have_prune and changed:
        ids = [i for i, k in enumerate(keep) if k]
    next_id = r.shape[1]
    tried = set()
    while True:
        id_pairs = {frozenset((ids[i], ids[j])): (i, j)
                    for i, j in _merge_pairs(cur, config.merge_threshold, set())}
        for a, b in extra_pairs:
            if a in ids and b in ids and a != b:
                id_pairs.setdefault(
                    frozenset((a, b)), (min(ids.index(a), ids.index(b)),
                                        max(ids.index(a), ids.index(b))))
        candidates = [(key, ij) for key, ij in id_pairs.items()
                      if key not in tried]
        if not candidates:
            break
        key, (i, j) = candidates[0]
        cand = np.delete(cur, j, axis=1)
        cand[:, i] = cur[:, i] + cur[:, j]
        elbo2, state2 = refresh(cand)
        if elbo2 >= cur_elbo - config.elbo_tol * max(1.0, abs(cur_elbo)):
            cur, cur_elbo, cur_state = cand, elbo2, state2
            ids = ids[:j] + ids[j + 1:]
            ids[i] = next_id
            next_id += 1
            changed = True
        else:
            tried.add(key)

    if not changed:
        return resp, current_elbo, None, False
    return Responsibilities(r=cur), cur_elbo, cur_state, changed


def _closest_posterior_pairs(ybar, n_pairs=6):
    """Column-index pairs of the clusters with the closest posterior means."""
    m = ybar.shape[0]
    if m < 2:
        return []
    dists = [(float(np.linalg.norm(ybar[i] - ybar[j])), i, j)
             for i in range(m) for j in range(i + 1, m)]
    dists.sort()
    return [(i, j) for _, i, j in dists[:n_pairs]]


class _PointState:
    """One coordinate-ascent sweep of the point variant, from resp."""

    def __init__(self, dataset, model, hyper, stats_d_raw):
        self.dataset = dataset
        self.model = model
        self.hyper = hyper
        self.stats_d_raw = stats_d_raw

    def sweep(self, resp, dirichlet, kappa):
        phi = self.dataset.phi
        stats = center_stats(accumulate_stats(resp.r, phi), self.model.mu)
        stats_d = center_stats(self.stats_d_raw, self.model.mu)
        posts = vbpoint.update_q_y(stats, self.model, kappa)
        posts_d = vbpoint.update_q_y(stats_d, self.model, kappa)
        resp = vbpoint.update_q_theta(phi, posts, self.model, dirichlet, kappa)
        dirichlet = vbpoint.update_q_pi(resp.counts, self.hyper.tau0, kappa)
        stats = center_stats(accumulate_stats(resp.r, phi), self.model.mu)
        elbo, terms = vbpoint.elbo_point(
            stats, stats_d, posts, posts_d, resp, dirichlet, self.model, self.hyper)
        return dict(stats=stats, stats_d=stats_d, posts=posts, posts_d=posts_d,
                    resp=resp, dirichlet=dirichlet, elbo=elbo, terms=terms)


def _default_bayes_hyper(hyper, dataset):
    if hyper.mu0 is None:
        hyper.mu0 = dataset.phi_d.mean(axis=0) if dataset.phi_d.size \
            else dataset.phi.mean(axis=0)
    if hyper.beta is None:
        ref = dataset.phi_d if dataset.phi_d.size else dataset.phi
        tr_cov = float(np.trace(np.cov(ref.T))) if ref.shape[0] > 1 else 1.0
        hyper.beta = 1e-2 * ref.shape[1] / max(tr_cov, 1e-12)
    return hyper


def run_adaptation(dataset, model_init, hyper, config):
    """Adapt an SPLDA model on a mixed labelled/unlabelled dataset.

    Executes: init -> loop { q updates at the current kappa; optional
    M-steps / hyperparameter optimization; ELBO; kappa growth; periodic
    prune/merge } until the relative ELBO change falls below ``elbo_tol``.
    """
    if dataset.phi.shape[0] == 0:
        return train_supervised(
            dataset.phi_d, dataset.labels_d, model_init.n_y, model_init=model_init,
            max_iter=config.max_iter, elbo_tol=config.elbo_tol, seed=config.seed)
    if dataset.d != model_init.d:
        raise ValueError(
            f"model dimension {model_init.d} does not match data {dataset.d}")
    hyper = Hyperparams(tau0=config.tau0, eta=config.eta,
                        mu0=hyper.mu0, beta=hyper.beta,
                        a_alpha=hyper.a_alpha, b_alpha=hyper.b_alpha)
    if config.variant == "bayes":
        hyper = _default_bayes_hyper(hyper, dataset)
        return _run_bayes(dataset, model_init, hyper, config)
    return _run_point(dataset, model_init, hyper, config)


def sweep_m(dataset, model_init, hyper, config, m_values):
    """Model selection over the initial cluster count.

    Runs ``run_adaptation`` once per value in ``m_values`` and returns
    ``(best_report, reports)`` where ``best_report`` maximizes the final
    lower bound.  Every run uses the same seed and settings apart from
    ``m_init``.
    """
    m_values = [int(m) for m in m_values]
    if not m_values:
        raise ValueError("m_values must be non-empty")
    reports = []
    for m in m_values:
        cfg = replace(config, m_init=m)
        reports.append(run_adaptation(dataset, model_init, hyper, cfg))
    best = max(reports, key=lambda rep: rep.elbo_trace[-1])
    return best, reports


def _run_point(dataset, model_init, hyper, config):
    phi = dataset.phi
    report = RunReport()
    model = model_init
    resp = init_responsibilities(dataset, model, config)
    dirichlet = vbpoint.update_q_pi(resp.counts, hyper.tau0)
    stats_d_raw = accumulate_stats(dataset.one_hot_labels(), dataset.phi_d) \
        if dataset.phi_d.size else SuffStats(
            n=np.zeros(0), f=np.zeros((0, dataset.d)),
            s=np.zeros((dataset.d, dataset.d)))
    kappa = config.kappa0 if config.anneal else 1.0
    since_restructure = 0

    for it in range(config.max_iter):
        engine = _PointState(dataset, model, hyper, stats_d_raw)
        state = engine.sweep(resp, dirichlet, kappa)
        resp, dirichlet = state["resp"], state["dirichlet"]
        elbo = state["elbo"]

        if config.do_msteps:
            c, r = vbpoint.accumulators(state["stats"], state["posts"])
            c_d, r_d = vbpoint.accumulators(state["stats_d"], state["posts_d"])
            if config.sampler_k > 0:
                c, r = _sampler_accumulators(
                    resp, phi, model, hyper, config, state, (c, r))
            vtilde = vbpoint.mstep_V(c, r, c_d, r_d, hyper.eta)
            c_p = c + hyper.eta * c_d
            r_p = r + hyper.eta * r_d
            w = vbpoint.mstep_W(
                state["stats"].s, state["stats_d"].s, c_p, r_p, vtilde,
                state["stats"].n_total, state["stats_d"].n_total, hyper.eta)
            model = SpldaModel(mu=vtilde[:, -1], v=vtilde[:, :-1], w=w)
            if config.min_div:
                model, (mu_y, t) = vbpoint.min_divergence(
                    state["posts"], state["posts_d"], model, hyper.eta,
                    with_transform=True)
                state["posts"] = vbpoint.standardize_posteriors(
                    state["posts"], mu_y, t)
                state["posts_d"] = vbpoint.standardize_posteriors(
                    state["posts_d"], mu_y, t)
            if config.hyper_opt_tau0 and dirichlet.tau.shape[0] >= 2:
                hyper.tau0 = vbpoint.mstep_tau0(dirichlet.e_ln_pi, hyper.tau0)

        report.elbo_trace.append(elbo)
        report.m_trace.append(resp.r.shape[1])
        report.kappa_trace.append(kappa)
        if not np.isfinite(elbo):
            raise FloatingPointError(
                f"non-finite ELBO at iteration {it}: {elbo!r}")

        restructured = False
        if (config.prune_merge and since_restructure >= config.prune_every
                and kappa == 1.0):
            engine = _PointState(dataset, model, hyper, stats_d_raw)

            def refresh(r_matrix):
                resp_c = Responsibilities(r=r_matrix)
                dir_c = vbpoint.update_q_pi(resp_c.counts, hyper.tau0)
                st = engine.sweep(resp_c, dir_c, 1.0)
                return st["elbo"], st

            resp2, elbo2, st2, restructured = prune_and_merge(
                resp, config, refresh, elbo,
                extra_pairs=_closest_posterior_pairs(state["posts"].ybar))
            if restructured:
                report.diagnostics.append(
                    f"iter {it}: restructured M {resp.r.shape[1]} -> {resp2.r.shape[1]}")
                resp, dirichlet = st2["resp"], st2["dirichlet"]
                since_restructure = 0
        if kappa == 1.0:
            since_restructure += 1

        if kappa < 1.0:
            kappa = min(kappa * config.kappa_growth, 1.0)
        elif (not restructured and len(report.elbo_trace) >= 2
              and report.kappa_trace[-1] == 1.0):
            prev = report.elbo_trace[-2]
            if abs(elbo - prev) < config.elbo_tol * max(1.0, abs(prev)):
                report.converged = True
                break

    report.labels = np.argmax(resp.r, axis=1)  # ties: lowest index wins
    report.model = model
    report.elbo_terms = state["terms"]
    return report


def _sampler_accumulators(resp, phi, model, hyper, config, state, default):
    counts, fsums = sampled_statistics(
        resp, phi, config.sampler_k, seed=config.seed)
    if config.sampler_strategy == "best_sample":
        elbos = sample_elbos(counts, fsums, phi, model, hyper.tau0)
        j = int(np.argmax(elbos))
        stats = center_stats(
            SuffStats(n=counts[j], f=fsums[j], s=state["stats"].s), model.mu)
        posts = vbpoint.update_q_y(stats, model)
        return vbpoint.accumulators(stats, posts)
    # average_accumulators: mean of per-sample (C, R)
    c_acc = 0.0
    r_acc = 0.0
    for j in range(counts.shape[0]):
        stats = center_stats(
            SuffStats(n=counts[j], f=fsums[j], s=state["stats"].s), model.mu)
        posts = vbpoint.update_q_y(stats, model)
        c_j, r_j = vbpoint.accumulators(stats, posts)
        c_acc += c_j
        r_acc += r_j
    return c_acc / counts.shape[0], r_acc / counts.shape[0]


def _run_bayes(dataset, model_init, hyper, config):
    phi = dataset.phi
    report = RunReport()
    resp = init_responsibilities(dataset, model_init, config)
    dirichlet = vbpoint.update_q_pi(resp.counts, hyper.tau0)
    stats_d_raw = accumulate_stats(dataset.one_hot_labels(), dataset.phi_d) \
        if dataset.phi_d.size else SuffStats(
            n=np.zeros(0), f=np.zeros((0, dataset.d)),
            s=np.zeros((dataset.d, dataset.d)))
    rowpost = vbbayes.RowPosteriors.point_mass(model_init.vtilde)
    wpost = vbbayes.WishartPosterior.point_mass(model_init.w)
    alphapost = vbbayes.update_q_alpha(rowpost, hyper)
    kappa = config.kappa0 if config.anneal else 1.0
    since_restructure = 0

    def sweep(resp, dirichlet, rowpost, wpost, alphapost, kappa):
        stats = accumulate_stats(resp.r, phi)
        posts = vbbayes.update_q_y_bayes(stats, rowpost, wpost, kappa)
        posts_d = vbbayes.update_q_y_bayes(stats_d_raw, rowpost, wpost, kappa)
        resp = vbbayes.update_q_theta_bayes(
            phi, posts, rowpost, wpost, dirichlet, kappa)
        dirichlet = vbpoint.update_q_pi(resp.counts, hyper.tau0, kappa)
        stats = accumulate_stats(resp.r, phi)
        c, r = vbpoint.accumulators(stats, posts)
        c_d, r_d = vbpoint.accumulators(stats_d_raw, posts_d)
        c_p, r_p = c + hyper.eta * c_d, r + hyper.eta * r_d
        rowpost = vbbayes.update_q_vtilde_rows(
            c_p, r_p, wpost, alphapost, hyper, rowpost, kappa)
        alphapost = vbbayes.update_q_alpha(rowpost, hyper, kappa)
        wpost = vbbayes.update_q_wishart(
            stats.s, stats_d_raw.s, c_p, r_p, rowpost,
            stats.n_total, stats_d_raw.n_total, hyper.eta, kappa)
        elbo, terms = vbbayes.elbo_bayes(
            stats, stats_d_raw, posts, posts_d, resp, dirichlet,
            rowpost, alphapost, wpost, hyper)
        return dict(resp=resp, dirichlet=dirichlet, rowpost=rowpost,
                    wpost=wpost, alphapost=alphapost, posts=posts,
                    posts_d=posts_d, elbo=elbo, terms=terms)

    state = None
    for it in range(config.max_iter):
        state = sweep(resp, dirichlet, rowpost, wpost, alphapost, kappa)
        resp, dirichlet = state["resp"], state["dirichlet"]
        rowpost, wpost, alphapost = (
            state["rowpost"], state["wpost"], state["alphapost"])
        elbo = state["elbo"]
        if config.hyper_opt_alpha:
            hyper.a_alpha, hyper.b_alpha = vbbayes.optimize_hyper_alpha(
                alphapost, hyper.a_alpha)
        if config.hyper_opt_mu:
            hyper.mu0, hyper.beta = vbbayes.optimize_hyper_mu(
                rowpost, isotropic=np.isscalar(hyper.beta))
        if config.hyper_opt_tau0 and dirichlet.tau.shape[0] >= 2:
            hyper.tau0 = vbpoint.mstep_tau0(dirichlet.e_ln_pi, hyper.tau0)

        report.elbo_trace.append(elbo)
        report.m_trace.append(resp.r.shape[1])
        report.kappa_trace.append(kappa)
        if not np.isfinite(elbo):
            raise FloatingPointError(f"non-finite ELBO at iteration {it}")

        restructured = False
        if (config.prune_merge and since_restructure >= config.prune_every
                and kappa == 1.0):

            def refresh(r_matrix):
                resp_c = Responsibilities(r=r_matrix)
                dir_c = vbpoint.update_q_pi(resp_c.counts, hyper.tau0)
                st = sweep(resp_c, dir_c, rowpost, wpost, alphapost, 1.0)
                return st["elbo"], st

            resp2, elbo2, st2, restructured = prune_and_merge(
                resp, config, refresh, elbo,
                extra_pairs=_closest_posterior_pairs(state["posts"].ybar))
            if restructured:
                report.diagnostics.append(
                    f"iter {it}: restructured M {resp.r.shape[1]} -> {resp2.r.shape[1]}")
                resp, dirichlet = st2["resp"], st2["dirichlet"]
                rowpost, wpost, alphapost = (
                    st2["rowpost"], st2["wpost"], st2["alphapost"])
                since_restructure = 0
        if kappa == 1.0:
            since_restructure += 1

        if kappa < 1.0:
            kappa = min(kappa * config.kappa_growth, 1.0)
        elif not restructured and len(report.elbo_trace) >= 2:
            prev = report.elbo_trace[-2]
            if abs(elbo - prev) < config.elbo_tol * max(1.0, abs(prev)):
                report.converged = True
                break

    report.labels = np.argmax(resp.r, axis=1)
    report.model = SpldaModel(
        mu=rowpost.mubar, v=rowpost.vbar, w=wpost.e_w)
    report.elbo_terms = state["terms"]
    report.bayes_state = dict(rowpost=rowpost, wpost=wpost,
                              alphapost=alphapost, hyper=hyper)
    return report


def train_supervised(phi_d, labels_d, n_y, model_init=None, max_iter=200,
                     elbo_tol=1e-7, seed=0):
    """Supervised maximum-likelihood SPLDA (EM on hard labels).

    Used to build the initial model before adaptation; requires N_d > d.
    """
    phi_d = np.asarray(phi_d, dtype=float)
    labels_d = np.asarray(labels_d, dtype=int)
    n_d, d = phi_d.shape
    if n_y < 1:
        raise ValueError("n_y must be >= 1")
    if n_d <= d:
        raise ValueError(f"need N_d > d for a valid W (N_d={n_d}, d={d})")
    m_d = labels_d.max() + 1
    resp = _one_hot(labels_d, m_d)
    stats_raw = accumulate_stats(resp, phi_d)
    if model_init is None:
        rng = np.random.default_rng(seed)
        mu = phi_d.mean(axis=0)
        cov = np.cov(phi_d.T) + 1e-8 * np.eye(d)
        scale = np.sqrt(np.trace(cov) / d)
        model = SpldaModel(
            mu=mu, v=scale * rng.standard_normal((d, n_y)) / np.sqrt(n_y),
            w=np.linalg.inv(cov))
    else:
        model = model_init

    report = RunReport()
    empty_posts = SpeakerPosteriors(
        ybar=np.zeros((0, n_y)), prec=np.zeros((0, n_y, n_y)))
    empty_stats = SuffStats(n=np.zeros(0), f=np.zeros((0, d)),
                            s=np.zeros((d, d)))
    for it in range(max_iter):
        stats = center_stats(stats_raw, model.mu)
        posts = vbpoint.update_q_y(stats, model)
        c_d, r_d = vbpoint.accumulators(stats, posts)
        elbo = (vbpoint._data_term(stats.n_total, stats.s, c_d, r_d, model)
                + vbpoint._y_prior_term(posts)
                - vbpoint._y_entropy_term(posts))
        report.elbo_trace.append(float(elbo))
        report.m_trace.append(int(m_d))
        report.kappa_trace.append(1.0)
        vtilde = vbpoint.mstep_V(np.zeros_like(c_d), np.zeros_like(r_d),
                                 c_d, r_d, 1.0)
        w = vbpoint.mstep_W(np.zeros((d, d)), stats.s, c_d, r_d, vtilde,
                            0.0, stats.n_total, 1.0)
        model = SpldaModel(mu=vtilde[:, -1], v=vtilde[:, :-1], w=w)
        model, (mu_y, t) = vbpoint.min_divergence(
            empty_posts, posts, model, 1.0, with_transform=True)
        if len(report.elbo_trace) >= 2:
            prev = report.elbo_trace[-2]
            if abs(elbo - prev) < elbo_tol * max(1.0, abs(prev)):
                report.converged = True
                break
    report.labels = labels_d.copy()
    report.model = model
    return report
