"""Banks of per-target 1-lag forecasting models.

Every model family predicts each of the ``V`` variables at ``t + 1`` from
the full ``V``-vector at ``t`` with one independent sub-model per target.
A parameter block is ``V x V`` with entry ``(u, v)`` the influence of
predictor ``u`` on target ``v``.
"""

import csv
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
from sklearn.ensemble import RandomForestRegressor

from .errors import InsufficientDataError, ShapeError, SingularFitError
from .panel import SupervisedPairs

__all__ = [
    "ModelKind",
    "Hyperparameters",
    "ForecastModel",
    "LinearTarget",
    "ForestTarget",
    "BoostedTarget",
    "fit_model",
    "fit_series",
    "predict",
    "extract_parameters",
    "test_mse",
    "mse_per_series",
    "write_coefficients",
]


class ModelKind(str, Enum):
    VAR = "var"
    RF = "rf"
    EBM = "ebm"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown model kind {value!r}; expected one of var, rf, ebm") from None


@dataclass(frozen=True)
class Hyperparameters:
    """Settings for all three model families.

    ``max_features=None`` means ``ceil(V / 3)`` and ``max_depth=None`` grows
    trees until ``min_samples_leaf`` stops them.
    """

    ridge_lambda: float = 1e-6
    n_trees: int = 100
    min_samples_leaf: int = 5
    max_features: int | None = None
    max_depth: int | None = None
    n_cycles: int = 100
    learning_rate: float = 0.1
    n_bins: int = 64

    def __post_init__(self):
        if self.ridge_lambda < 0:
            raise ValueError("ridge_lambda must be >= 0")
        if self.n_trees < 1 or self.min_samples_leaf < 1:
            raise ValueError("n_trees and min_samples_leaf must be positive")
        if self.max_features is not None and self.max_features < 1:
            raise ValueError("max_features must be positive")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be positive")
        if self.n_cycles < 0:
            raise ValueError("n_cycles must be >= 0")
        if not 0 < self.learning_rate <= 1:
            raise ValueError("learning_rate must lie in (0, 1]")
        if self.n_bins < 2:
            raise ValueError("n_bins must be >= 2")


# ----------------------------------------------------------------- sub-models


@dataclass(frozen=True, eq=False)
class LinearTarget:
    intercept: float
    coef: np.ndarray

    def predict(self, x):
        return self.intercept + x @ self.coef

    @property
    def importance(self):
        return self.coef


@dataclass(frozen=True, eq=False)
class ForestTarget:
    forest: RandomForestRegressor
    importance: np.ndarray

    def predict(self, x):
        return self.forest.predict(x)


@dataclass(frozen=True, eq=False)
class BoostedTarget:
    """Additive model ``intercept + sum_f shape_f(bin_f(x_f))``.

    ``trace[c]`` is the training MSE after ``c`` boosting cycles.
    """

    intercept: float
    edges: tuple
    shapes: tuple
    importance: np.ndarray
    trace: np.ndarray

    def predict(self, x):
        out = np.full(x.shape[0], self.intercept)
        for f, (edges, shape) in enumerate(zip(self.edges, self.shapes)):
            out += shape[np.searchsorted(edges, x[:, f], side="right")]
        return out


def _fit_linear(x, y, ridge_lambda):
    n, v = x.shape
    design = np.column_stack([np.ones(n), x])
    rhs = y
    if ridge_lambda > 0:
        penalty = np.zeros((v, v + 1))
        penalty[:, 1:] = math.sqrt(ridge_lambda) * np.eye(v)
        design = np.vstack([design, penalty])
        rhs = np.concatenate([y, np.zeros(v)])
    beta, _, rank, _ = np.linalg.lstsq(design, rhs, rcond=None)
    if rank < v + 1:
        raise SingularFitError(
            f"least-squares system has rank {rank} < {v + 1} (n={n}, ridge_lambda={ridge_lambda})"
        )
    return LinearTarget(float(beta[0]), beta[1:])


def _tree_importance(tree, n_features):
    """Decrease in squared-error impurity per feature, node-weighted."""
    t = tree.tree_
    w = t.weighted_n_node_samples
    sse = w * t.impurity
    out = np.zeros(n_features)
    internal = t.children_left >= 0
    left, right = t.children_left[internal], t.children_right[internal]
    gain = sse[internal] - sse[left] - sse[right]
    np.add.at(out, t.feature[internal], gain)
    return out / w[0]


def _fit_forest(x, y, hyper, seed):
    n, v = x.shape
    if n < hyper.min_samples_leaf:
        raise InsufficientDataError(
            f"{n} training rows is fewer than min_samples_leaf={hyper.min_samples_leaf}"
        )
    max_features = hyper.max_features or math.ceil(v / 3)
    forest = RandomForestRegressor(
        n_estimators=hyper.n_trees,
        min_samples_leaf=hyper.min_samples_leaf,
        max_features=min(max_features, v),
        max_depth=hyper.max_depth,
        bootstrap=True,
        random_state=seed,
    )
    forest.fit(x, y)
    imp = np.mean([_tree_importance(est, v) for est in forest.estimators_], axis=0)
    return ForestTarget(forest, np.maximum(imp, 0.0))


def _equal_frequency_edges(col, n_bins):
    qs = np.quantile(col, np.linspace(0.0, 1.0, n_bins + 1)[1:-1])
    return np.unique(qs)


def _best_stump(codes, resid, n_codes):
    """Least-squares split of binned ``codes`` into ``<= s`` and ``> s``."""
    sums = np.bincount(codes, weights=resid, minlength=n_codes)
    counts = np.bincount(codes, minlength=n_codes).astype(float)
    sum_left = np.cumsum(sums)[:-1]
    n_left = np.cumsum(counts)[:-1]
    sum_right = sums.sum() - sum_left
    n_right = counts.sum() - n_left
    ok = (n_left > 0) & (n_right > 0)
    if not ok.any():
        return None
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = np.where(ok, sum_left**2 / n_left + sum_right**2 / n_right, -np.inf)
    s = int(np.argmax(gain))
    return s, sum_left[s] / n_left[s], sum_right[s] / n_right[s]


def _fit_boosted(x, y, hyper):
    n, v = x.shape
    if n < 1:
        raise InsufficientDataError("no training rows")
    intercept = float(np.mean(y))
    edges = [_equal_frequency_edges(x[:, f], hyper.n_bins) for f in range(v)]
    codes = [np.searchsorted(edges[f], x[:, f], side="right") for f in range(v)]
    shapes = [np.zeros(len(e) + 1) for e in edges]
    pred = np.full(n, intercept)
    trace = [float(np.mean((y - pred) ** 2))]
    lr = hyper.learning_rate
    for _ in range(hyper.n_cycles):
        for f in range(v):
            stump = _best_stump(codes[f], y - pred, len(shapes[f]))
            if stump is None:
                continue
            s, left, right = stump
            step = np.empty(len(shapes[f]))
            step[: s + 1] = lr * left
            step[s + 1 :] = lr * right
            shapes[f] += step
            pred += step[codes[f]]
        trace.append(float(np.mean((y - pred) ** 2)))
    importance = np.array([np.mean(np.abs(shapes[f][codes[f]])) for f in range(v)])
    return BoostedTarget(intercept, tuple(edges), tuple(shapes), importance, np.array(trace))


def _target_seed(seed, v):
    return int(np.random.SeedSequence([int(seed), int(v)]).generate_state(1)[0])


def _fit_target(kind, x, y, hyper, seed, v):
    if kind is ModelKind.VAR:
        return _fit_linear(x, y, hyper.ridge_lambda)
    if kind is ModelKind.RF:
        return _fit_forest(x, y, hyper, _target_seed(seed, v))
    return _fit_boosted(x, y, hyper)


# --------------------------------------------------------------------- models


@dataclass(frozen=True, eq=False)
class ForecastModel:
    kind: ModelKind
    sub_models: tuple
    variable_names: tuple
    hyper: Hyperparameters

    @property
    def n_vars(self):
        return len(self.sub_models)

    def predict_rows(self, x):
        """Predict the next step for every row of the ``n x V`` array ``x``."""
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.n_vars:
            raise ShapeError(f"expected an n x {self.n_vars} array, got shape {x.shape}")
        if x.shape[0] == 0:
            return np.empty((0, self.n_vars))
        return np.column_stack([m.predict(x) for m in self.sub_models])


def fit_model(kind, pairs_per_target, hyper=None, seed=0, variable_names=None):
    """Fit one sub-model per entry of ``pairs_per_target`` (target order)."""
    kind = ModelKind.parse(kind)
    hyper = hyper or Hyperparameters()
    pairs_per_target = list(pairs_per_target)
    v = len(pairs_per_target)
    subs = []
    for j, pairs in enumerate(pairs_per_target):
        if pairs.target_variable != j:
            raise ShapeError(f"pairs_per_target[{j}] targets variable {pairs.target_variable}")
        if len(pairs) == 0:
            raise InsufficientDataError(f"no training pairs for target {j}")
        if pairs.predictors.shape[1] != v:
            raise ShapeError(f"predictors for target {j} have dimension {pairs.predictors.shape[1]}, expected {v}")
        subs.append(_fit_target(kind, pairs.predictors, pairs.targets, hyper, seed, j))
    names = tuple(variable_names) if variable_names is not None else tuple(f"v{j}" for j in range(v))
    return ForecastModel(kind, tuple(subs), names, hyper)


def fit_series(kind, series, hyper=None, seed=0, variable_names=None):
    """Fit a pooled model on the concatenated lagged pairs of ``series``."""
    kind = ModelKind.parse(kind)
    hyper = hyper or Hyperparameters()
    series = list(series)
    if not series:
        raise InsufficientDataError("no series to fit on")
    x = np.concatenate([s.lagged[0] for s in series])
    y = np.concatenate([s.lagged[1] for s in series])
    v = series[0].n_vars
    subs = []
    for j in range(v):
        ok = ~np.isnan(y[:, j])
        if not ok.any():
            ids = ", ".join(s.id for s in series[:5])
            raise InsufficientDataError(f"no training pairs for target {j} (series {ids}...)")
        subs.append(_fit_target(kind, x[ok], y[ok, j], hyper, seed, j))
    names = tuple(variable_names) if variable_names is not None else tuple(f"v{j}" for j in range(v))
    return ForecastModel(kind, tuple(subs), names, hyper)


def predict(model, x):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != model.n_vars:
        raise ShapeError(f"expected a vector of length {model.n_vars}, got shape {x.shape}")
    if np.isnan(x).any():
        raise ValueError("predictor vector contains missing entries")
    return model.predict_rows(x[None, :])[0]


def extract_parameters(model):
    """``V x V`` block: slopes for VAR, nonnegative importances for RF/EBM."""
    return np.column_stack([np.asarray(m.importance, dtype=float) for m in model.sub_models])


def mse_per_series(model, series):
    """Mean squared one-step error of ``model`` on each of ``series``.

    The denominator is the number of valid ``(t, v)`` pairs of each series;
    a series with none yields ``InsufficientDataError``.
    """
    series = list(series)
    xs = [s.lagged[0] for s in series]
    ys = [s.lagged[1] for s in series]
    lengths = np.array([len(x) for x in xs])
    if len(series) == 0:
        return np.empty(0)
    pred = model.predict_rows(np.concatenate(xs)) if lengths.sum() else np.empty((0, model.n_vars))
    err = (np.concatenate(ys) - pred) ** 2
    owner = np.repeat(np.arange(len(series)), lengths)
    ok = ~np.isnan(err)
    sse = np.bincount(owner, weights=np.where(ok, err, 0.0).sum(axis=1), minlength=len(series))
    cnt = np.bincount(owner, weights=ok.sum(axis=1), minlength=len(series))
    if np.any(cnt == 0):
        bad = [s.id for s, c in zip(series, cnt) if c == 0]
        raise InsufficientDataError(f"no valid test pairs for individual(s) {bad}")
    return sse / cnt


def test_mse(model, test_series):
    return float(mse_per_series(model, [test_series])[0])


# keep pytest from collecting the public function above as a test
test_mse.__test__ = False


def write_coefficients(model, path):
    """Write a VAR model's intercepts and slopes as predictor x target CSV."""
    if model.kind is not ModelKind.VAR:
        raise ValueError("coefficient export is only defined for VAR models")
    block = extract_parameters(model)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["predictor", *model.variable_names])
        w.writerow(["intercept", *(repr(float(m.intercept)) for m in model.sub_models)])
        for name, row in zip(model.variable_names, block):
            w.writerow([name, *(repr(float(c)) for c in row)])
