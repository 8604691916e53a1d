"""Select the cluster count by sweeping the initial M.

When the number of unlabelled speakers is unknown and prune/merge is
off, run the adaptation at several candidate counts and keep the run
with the highest final lower bound.
"""

import numpy as np

from spldavb import (
    Hyperparams,
    RunConfig,
    SynthSpec,
    clustering_metrics,
    generate,
    sweep_m,
    train_supervised,
)
from spldavb.synth import split_dataset

phi, labels, _ = generate(SynthSpec(
    d=8, n_y=4, m_true=8, per_speaker=12, eigenvoice_scale=5.0,
    noise_scale=1.0, seed=0))
dataset, true_unsup = split_dataset(phi, labels, 0.5, seed=0)
init = train_supervised(dataset.phi_d, dataset.labels_d, n_y=4, seed=0).model
m_true = len(np.unique(true_unsup))

candidates = [1, 2, 3, 4, 6, 8]
best, reports = sweep_m(
    dataset, init, Hyperparams(),
    RunConfig(m_init=1, init_method="ahc", max_iter=100, seed=0),
    m_values=candidates)

print("final lower bound per candidate M:")
for m, report in zip(candidates, reports):
    mark = "  <- best" if report is best else ""
    print(f"  M = {m}:  {report.elbo_trace[-1]:12.3f}{mark}")

print(f"true speaker count: {m_true}")
metrics = clustering_metrics(best.labels, true_unsup)
print(f"ARI of the selected run: {metrics.ari:.3f}")
