"""The three forecasting families: VAR, random forest and boosted additive models.

Each model predicts every variable at t+1 from all variables at t. The
parameter block extracted from a model is V x V: column v describes the
sub-model for target v. VAR gives slopes; the other two give importances.
"""

import numpy as np

from emaclust import Hyperparameters, SyntheticSpec, extract_parameters, fit_series, generate_synthetic
from emaclust.forecast import mse_per_series, test_mse
from emaclust.panel import make_folds

spec = SyntheticSpec(n_groups=1, individuals_per_group=6, n_vars=3, noise_sd=0.3, within_group_perturbation_sd=0.0)
ds, _, mats = generate_synthetic(spec, seed=1, return_matrices=True)
folds = make_folds(ds)
train = [f.train for f in folds]
test = [f.test for f in folds]

# %% VAR: pooled least squares recovers the generating matrix (transposed)
var = fit_series("var", train)
print("true block:\n", np.round(mats[0].T, 2))
print("VAR block:\n", np.round(extract_parameters(var), 2))

# %% random forest and boosted additive model on the same pooled data
hyper = Hyperparameters(n_trees=50, n_cycles=60)
rf = fit_series("rf", train, hyper, seed=0)
ebm = fit_series("ebm", train, hyper)
print("RF importances:\n", np.round(extract_parameters(rf), 3))
print("EBM importances:\n", np.round(extract_parameters(ebm), 3))

# %% boosting only ever lowers the training error
trace = ebm.sub_models[0].trace
print(f"EBM training MSE: {trace[0]:.3f} -> {trace[-1]:.3f} after {len(trace) - 1} cycles")

# %% test error per individual; the noise floor is 0.3^2 = 0.09
for name, model in (("var", var), ("rf", rf), ("ebm", ebm)):
    print(name, np.round(mse_per_series(model, test), 3))
print("first individual, VAR:", round(test_mse(var, test[0]), 4))
