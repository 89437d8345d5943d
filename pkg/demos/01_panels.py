"""Panels, missing data and chronological splits.

A panel holds one multivariate series per individual. Lengths differ and
missing answers are NaN. This script builds a synthetic panel, writes it
to CSV and reads it back, then shows how one-step training pairs and the
train/test split are formed.
"""

import tempfile
from pathlib import Path

import numpy as np

from emaclust import SyntheticSpec, filter_compliance, generate_synthetic, load_csv, write_csv
from emaclust.panel import chronological_split, make_supervised_pairs

# %% two groups of individuals, each following its group's VAR(1) dynamics
spec = SyntheticSpec(n_groups=2, individuals_per_group=5, n_vars=3, length_range=(40, 60), missing_rate=0.1)
ds, truth = generate_synthetic(spec, seed=0)
print(f"{len(ds)} individuals, variables {ds.variable_names}")
print("lengths:", [s.n_rows for s in ds])
print("ground-truth groups:", truth)

# %% CSV round trip is exact, missing cells stay missing
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "panel.csv"
    write_csv(ds, path)
    print(path.read_text().splitlines()[:3])
    back = load_csv(path)
assert all(np.array_equal(a.values, b.values, equal_nan=True) for a, b in zip(ds, back))

# %% one-step pairs: a predictor row must be complete, targets are dropped per variable
first = ds[0]
for v in range(ds.n_vars):
    pairs = make_supervised_pairs(first, v)
    print(f"target {ds.variable_names[v]}: {len(pairs)} pairs from {first.n_rows} rows")

# %% the last 30% of each individual's rows is held out for testing
train, test = chronological_split(first, 0.3)
print(f"train rows {train.n_rows}, test rows {test.n_rows}")

# %% individuals answering too little can be dropped before clustering
kept = filter_compliance(ds, min_fraction=0.9, full_length=60)
print(f"{len(kept)} of {len(ds)} individuals answered at least 90% of 60 prompts")
