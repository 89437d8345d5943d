"""Cluster validity and agreement: silhouette, DTW, AMI, ARI and stability."""

import numpy as np

from emaclust import SyntheticSpec, ami, ari, dtw_distance, dtw_matrix, generate_synthetic, silhouette, stability
from emaclust.experiments import ExperimentConfig, prepare, run_poc

# %% DTW aligns sequences of different lengths
print("DTW [0,0,1] vs [0,1,1]:", dtw_distance([0, 0, 1], [0, 1, 1]))
print("DTW [1,2,3] vs [4]:", dtw_distance([1, 2, 3], [4]), "normalized:", dtw_distance([1, 2, 3], [4], normalize=True))

# %% agreement between partitions is invariant to label names
a, b = [0, 0, 1, 1, 2, 2], [1, 1, 0, 0, 2, 2]
print("AMI of relabelled partition:", ami(a, b), "ARI:", ari(a, b))
print("ARI of crossed partition:", ari([0, 0, 1, 1], [0, 1, 0, 1]))

# %% silhouette of POC clusters under the DTW distance
spec = SyntheticSpec(n_groups=2, individuals_per_group=6, n_vars=2, length_range=(60, 80))
ds, truth = generate_synthetic(spec, seed=4)
ctx = prepare(ds, ExperimentConfig())
dm = dtw_matrix(ds)
runs = [run_poc(ctx, "var", 3, seed=s).labels for s in range(5)]
for labels in runs[:2]:
    if len(set(labels)) > 1:
        print("labels", labels, "DTW silhouette", round(silhouette(dm, labels), 3))

# %% stability: mean pairwise AMI across repeated runs
print("stability over 5 seeds:", round(stability(runs), 3))
print("k_effective per run:", [int(np.max(r)) + 1 for r in runs])
