"""Command-line surface: synth | train | adapt | eval | elbo-audit.

Thin shell over the library; every command's behavior equals the
corresponding library call.
"""

import argparse
import sys

import numpy as np

from . import fileio
from .adapt import RunConfig, run_adaptation, train_supervised
from .model import Dataset
from .oracles import clustering_metrics
from .synth import SynthSpec, generate, split_dataset
from .vbpoint import Hyperparams

_CONFIG_KEYS = {
    "variant", "m_init", "init_method", "anneal", "kappa0", "kappa_growth",
    "prune_merge", "prune_threshold", "merge_threshold", "prune_every",
    "elbo_tol", "max_iter", "eta", "tau0", "do_msteps", "min_div",
    "sampler_k", "sampler_strategy", "hyper_opt_tau0", "hyper_opt_alpha",
    "hyper_opt_mu", "seed",
}

_BOOL_KEYS = {"anneal", "prune_merge", "do_msteps", "min_div",
              "hyper_opt_tau0", "hyper_opt_alpha", "hyper_opt_mu"}
_INT_KEYS = {"m_init", "prune_every", "max_iter", "sampler_k", "seed"}
_FLOAT_KEYS = {"kappa0", "kappa_growth", "prune_threshold", "merge_threshold",
               "elbo_tol", "eta", "tau0"}


def _config_from_file(path, overrides):
    raw = fileio.read_config(path, _CONFIG_KEYS) if path else {}
    raw.update({k: v for k, v in overrides.items() if v is not None})
    kwargs = {}
    for key, value in raw.items():
        if key in _BOOL_KEYS:
            kwargs[key] = str(value).lower() in ("1", "true", "yes", "on")
        elif key in _INT_KEYS:
            kwargs[key] = int(value)
        elif key in _FLOAT_KEYS:
            kwargs[key] = float(value)
        else:
            kwargs[key] = value
    return RunConfig(**kwargs)


def cmd_synth(args):
    spec = SynthSpec(d=args.d, n_y=args.ny, m_true=args.speakers,
                     per_speaker=args.per_speaker,
                     eigenvoice_scale=args.eigenvoice_scale,
                     noise_scale=args.noise_scale, seed=args.seed)
    phi, labels, model = generate(spec)
    dataset, true_unsup = split_dataset(phi, labels, args.sup_fraction,
                                        seed=args.seed)
    prefix = args.out_prefix
    fileio.write_matrix(prefix + ".phi", dataset.phi)
    fileio.write_matrix(prefix + ".phi_d", dataset.phi_d)
    fileio.write_labels(prefix + ".labels_d", dataset.labels_d)
    fileio.write_labels(prefix + ".true_labels", true_unsup)
    fileio.write_model(prefix + ".true_model", model)
    print(f"wrote {dataset.phi.shape[0]} unsupervised and "
          f"{dataset.phi_d.shape[0]} supervised i-vectors "
          f"(d={args.d}, {args.speakers} speakers) to {prefix}.*")
    return 0


def cmd_train(args):
    phi_d = fileio.read_matrix(args.ivectors)
    labels = fileio.read_labels(args.labels)
    report = train_supervised(phi_d, labels, args.ny, seed=args.seed)
    fileio.write_model(args.out_model, report.model)
    if args.trace:
        fileio.write_report(args.trace, report, header={"command": "train"})
    print(f"trained SPLDA (d={report.model.d}, n_y={report.model.n_y}) "
          f"in {len(report.elbo_trace)} iterations, "
          f"final ELBO {report.elbo_trace[-1]:.6f}")
    return 0


def cmd_adapt(args):
    model, _ = fileio.read_model(args.model)
    phi = fileio.read_matrix(args.unsup_ivectors)
    phi_d = fileio.read_matrix(args.sup_ivectors)
    labels_d = fileio.read_labels(args.sup_labels)
    dataset = Dataset(phi=phi, phi_d=phi_d, labels_d=labels_d)
    overrides = {"eta": args.eta, "m_init": args.m_init,
                 "variant": args.variant, "seed": args.seed}
    config = _config_from_file(args.config, overrides)
    hyper = Hyperparams(tau0=config.tau0, eta=config.eta)
    report = run_adaptation(dataset, model, hyper, config)
    fileio.write_model(args.out_model, report.model,
                       bayes_state=report.bayes_state)
    fileio.write_labels(args.out_labels, report.labels)
    if args.out_report:
        fileio.write_report(args.out_report, report, header={
            "command": "adapt", "variant": config.variant,
            "eta": "%.17g" % config.eta, "m_init": config.m_init,
            "seed": config.seed, "converged": report.converged,
        })
    print(f"adapted model: M={report.m_trace[-1]}, "
          f"{len(report.elbo_trace)} iterations, "
          f"final ELBO {report.elbo_trace[-1]:.6f}")
    return 0


def cmd_eval(args):
    pred = fileio.read_labels(args.pred_labels)
    true = fileio.read_labels(args.true_labels)
    if pred.shape != true.shape:
        print(f"error: label files differ in length "
              f"({pred.size} vs {true.size})", file=sys.stderr)
        return 1
    metrics = clustering_metrics(pred, true)
    print(f"ARI {metrics.ari:.6f}")
    print(f"purity {metrics.purity:.6f}")
    return 0


def cmd_elbo_audit(args):
    model, _ = fileio.read_model(args.model)
    phi = fileio.read_matrix(args.unsup_ivectors)
    phi_d = fileio.read_matrix(args.sup_ivectors)
    labels_d = fileio.read_labels(args.sup_labels)
    dataset = Dataset(phi=phi, phi_d=phi_d, labels_d=labels_d)
    config = _config_from_file(args.config, {
        "variant": args.variant, "m_init": args.m_init, "seed": args.seed,
    })
    config.max_iter = args.sweeps
    hyper = Hyperparams(tau0=config.tau0, eta=config.eta)
    report = run_adaptation(dataset, model, hyper, config)
    total = 0.0
    for name, value in report.elbo_terms.items():
        print(f"{name:24s} {value:.12f}")
        total += value
    print(f"{'total':24s} {total:.12f}")
    assert abs(total - report.elbo_trace[-1]) < 1e-12 * max(1.0, abs(total))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="splda",
        description="Semi-supervised variational Bayes adaptation of SPLDA")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--ny", type=int, required=True)
    p.add_argument("--speakers", type=int, required=True)
    p.add_argument("--per-speaker", type=int, required=True)
    p.add_argument("--eigenvoice-scale", type=float, default=1.0)
    p.add_argument("--noise-scale", type=float, default=1.0)
    p.add_argument("--sup-fraction", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="supervised SPLDA training")
    p.add_argument("--ivectors", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--ny", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-model", required=True)
    p.add_argument("--trace")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("adapt", help="adapt a model on unlabelled data")
    p.add_argument("--model", required=True)
    p.add_argument("--sup-ivectors", required=True)
    p.add_argument("--sup-labels", required=True)
    p.add_argument("--unsup-ivectors", required=True)
    p.add_argument("--config")
    p.add_argument("--variant", choices=["point", "bayes"])
    p.add_argument("--m-init", type=int)
    p.add_argument("--eta", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out-model", required=True)
    p.add_argument("--out-labels", required=True)
    p.add_argument("--out-report")
    p.set_defaults(func=cmd_adapt)

    p = sub.add_parser("eval", help="clustering metrics of predicted labels")
    p.add_argument("--pred-labels", required=True)
    p.add_argument("--true-labels", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("elbo-audit", help="per-term lower-bound table")
    p.add_argument("--model", required=True)
    p.add_argument("--sup-ivectors", required=True)
    p.add_argument("--sup-labels", required=True)
    p.add_argument("--unsup-ivectors", required=True)
    p.add_argument("--config")
    p.add_argument("--variant", choices=["point", "bayes"])
    p.add_argument("--m-init", type=int)
    p.add_argument("--sweeps", type=int, default=1)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_elbo_audit)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
