"""Performance-optimized clustering: the k-models loop.

Clusters are chosen by forecasting error directly. Each cluster gets a
pooled model; every individual then moves to the cluster whose model
predicts its held-out part best. Clusters that empty out are dropped.
"""

import numpy as np

from emaclust import SyntheticSpec, ami, generate_synthetic, poc_run
from emaclust.experiments import ExperimentConfig, prepare, run_one_clustering, run_poc, run_random_clustering

spec = SyntheticSpec(n_groups=2, individuals_per_group=10, n_vars=4, missing_rate=0.1)
ds, truth = generate_synthetic(spec, seed=3)

# %% a single run, with its loss trace and termination reason
state = poc_run(ds, 2, "var", seed=0)
print("termination:", state.termination, "after", state.iteration, "update(s)")
print("loss trace:", np.round(state.assignment.trace, 3))
print("AMI against truth:", ami(state.best_so_far.assignment.labels, truth))

# %% asking for more clusters than there are groups: clusters often empty out
for seed in range(3):
    big = poc_run(ds, 8, "var", seed=seed)
    print(f"seed {seed}: k_given 8 -> k_effective {big.best_so_far.assignment.k_effective}")

# %% compared with the baselines on the same held-out data
ctx = prepare(ds, ExperimentConfig())
print("POC(k=2) loss:", round(run_poc(ctx, "var", 2, seed=0).total_loss, 3))
print("1-Clustering loss:", round(run_one_clustering(ctx, "var").total_loss, 3))
print("Random-Clustering(k=2) loss:", round(run_random_clustering(ctx, 2, "var", seed=0).total_loss, 3))
