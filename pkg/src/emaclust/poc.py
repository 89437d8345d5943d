"""Performance-optimized clustering (a k-models loop scored on held-out error).

Each individual is assigned to the cluster whose pooled model forecasts
its held-out part best. The loop alternates a forward step (fit one pooled
model per cluster on members' train parts) and an update step (move every
individual to its lowest-error cluster), and keeps the visited state with
the smallest total loss, the sum over individuals of their mean squared
one-step error.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmaclustError, InvalidKError
from .forecast import Hyperparameters, ModelKind, fit_series, mse_per_series
from .panel import make_folds
from .pdc import ClusterAssignment, compact_labels

__all__ = [
    "PocSnapshot",
    "PocState",
    "poc_init",
    "poc_run",
    "total_loss",
    "forward",
    "error_matrix",
]

INIT_MODES = ("farthest-first", "pairwise-first")


@dataclass(frozen=True, eq=False)
class PocSnapshot:
    assignment: ClusterAssignment
    cluster_models: tuple
    loss: float
    iteration: int


@dataclass(frozen=True, eq=False)
class PocState:
    """Last visited state of a run plus the best snapshot seen.

    ``termination`` is ``"converged"``, ``"cycle"`` or ``"max_iter"``. When
    an update step was evaluated against the last models, ``final_errors``
    holds that ``N x k`` error matrix.
    """

    assignment: ClusterAssignment
    cluster_models: tuple
    loss: float
    best_so_far: PocSnapshot
    iteration: int
    termination: str
    centroid_ids: tuple
    history: tuple = ()
    best_trace: tuple = ()
    final_errors: np.ndarray | None = field(default=None, repr=False)

    def to_json(self):
        return {
            "termination": self.termination,
            "iterations": self.iteration,
            "centroid_ids": list(self.centroid_ids),
            "loss_trace": list(self.assignment.trace),
            "best_loss_trace": list(self.best_trace),
            "labels_per_iteration": [list(map(int, h)) for h in self.history],
            "best": {
                "iteration": self.best_so_far.iteration,
                "loss": self.best_so_far.loss,
                "k_effective": self.best_so_far.assignment.k_effective,
                "labels": self.best_so_far.assignment.labels.tolist(),
            },
        }

    def write_json(self, path):
        Path(path).write_text(json.dumps(self.to_json(), indent=2))


def _sub_seed(seed, *coords):
    return int(np.random.SeedSequence([int(seed), *map(int, coords)]).generate_state(1)[0])


def _check_k(k, n):
    if not 1 <= k <= n:
        raise InvalidKError(f"k={k} must lie in [1, N={n}]")


def forward(labels, folds, kind, hyper, seed=0, variable_names=None):
    """Fit one pooled model per cluster on its members' train parts.

    Cluster ``j`` is fitted with a seed derived from ``(seed, j)`` only, so a
    partition can be rescored exactly by calling this again.
    """
    labels = np.asarray(labels)
    models = []
    for j in range(int(labels.max()) + 1):
        members = [folds[i].train for i in np.flatnonzero(labels == j)]
        try:
            models.append(fit_series(kind, members, hyper, _sub_seed(seed, j), variable_names))
        except EmaclustError as exc:
            raise type(exc)(f"cluster {j}: {exc}") from exc
    return tuple(models)


def error_matrix(models, series):
    """``N x k`` matrix of each series' mean squared error under each model."""
    return np.column_stack([mse_per_series(m, series) for m in models])


def total_loss(labels, cluster_models, series):
    """Sum over individuals of their mean squared error under their cluster's model."""
    labels = np.asarray(labels)
    series = list(series)
    total = 0.0
    for j, model in enumerate(cluster_models):
        idx = np.flatnonzero(labels == j)
        if len(idx):
            total += float(mse_per_series(model, [series[i] for i in idx]).sum())
    return total


def poc_init(ds, k, kind, hyper=None, seed=0, folds=None, test_fraction=0.3, init="farthest-first"):
    """Choose ``k`` centroid individuals and assign everyone to their best centroid model.

    Returns ``(centroid_ids, labels)``.
    """
    kind = ModelKind.parse(kind)
    hyper = hyper or Hyperparameters()
    if folds is None:
        folds = make_folds(ds, test_fraction)
    n = len(folds)
    _check_k(k, n)
    if init not in INIT_MODES:
        raise ValueError(f"unknown init {init!r}; expected one of {INIT_MODES}")
    rng = np.random.default_rng(seed)
    select = [f.select for f in folds]
    names = ds.variable_names if ds is not None else None

    def centroid_model(i):
        try:
            return fit_series(kind, [folds[i].train], hyper, _sub_seed(seed, i), names)
        except EmaclustError as exc:
            raise type(exc)(f"centroid {folds[i].train.id!r}: {exc}") from exc

    chosen = [int(rng.integers(n))]
    errs = [mse_per_series(centroid_model(chosen[0]), select)]
    if init == "farthest-first":
        while len(chosen) < k:
            score = np.min(np.column_stack(errs), axis=1)
            score[chosen] = -np.inf
            nxt = int(np.argmax(score))
            chosen.append(nxt)
            errs.append(mse_per_series(centroid_model(nxt), select))
    else:
        score = errs[0].copy()
        score[chosen] = -np.inf
        order = np.argsort(-score, kind="stable")
        for nxt in order[: k - 1]:
            chosen.append(int(nxt))
            errs.append(mse_per_series(centroid_model(int(nxt)), select))

    labels = np.argmin(np.column_stack(errs), axis=1)
    labels[chosen] = np.arange(k)
    return tuple(folds[i].train.id for i in chosen), labels.astype(np.int64)


def poc_run(
    ds,
    k,
    kind,
    hyper=None,
    max_iter=20,
    seed=0,
    folds=None,
    test_fraction=0.3,
    init="farthest-first",
):
    """Alternate forward and update steps until labels settle, cycle, or ``max_iter``.

    Clusters left empty by an update are dropped, so ``k_effective`` can
    fall below ``k``. The returned state's ``best_so_far`` is the visited
    state with the lowest total loss (earliest on ties).
    """
    kind = ModelKind.parse(kind)
    hyper = hyper or Hyperparameters()
    if folds is None:
        folds = make_folds(ds, test_fraction)
    select = [f.select for f in folds]
    names = ds.variable_names if ds is not None else None

    centroid_ids, labels = poc_init(ds, k, kind, hyper, seed, folds=folds, init=init)
    labels = compact_labels(labels)
    models = forward(labels, folds, kind, hyper, seed, names)
    loss = total_loss(labels, models, select)
    trace, history, best_trace = [loss], [labels], [loss]
    best = (labels, models, loss, 0)
    seen = {_canonical(labels)}
    termination = "max_iter"
    final_errors = None
    iteration = 0

    for it in range(1, max_iter + 1):
        errs = error_matrix(models, select)
        new = compact_labels(np.argmin(errs, axis=1))
        if np.array_equal(new, labels):
            termination, final_errors = "converged", errs
            break
        key = _canonical(new)
        if key in seen:
            termination, final_errors = "cycle", errs
            break
        seen.add(key)
        labels = new
        models = forward(labels, folds, kind, hyper, seed, names)
        loss = total_loss(labels, models, select)
        iteration = it
        trace.append(loss)
        history.append(labels)
        if loss < best[2]:
            best = (labels, models, loss, it)
        best_trace.append(best[2])

    def assignment(lab, value):
        return ClusterAssignment(lab, k, int(lab.max()) + 1, value, tuple(trace), seed)

    snapshot = PocSnapshot(assignment(best[0], best[2]), best[1], best[2], best[3])
    return PocState(
        assignment=assignment(labels, loss),
        cluster_models=models,
        loss=loss,
        best_so_far=snapshot,
        iteration=iteration,
        termination=termination,
        centroid_ids=centroid_ids,
        history=tuple(history),
        best_trace=tuple(best_trace),
        final_errors=final_errors,
    )


def _canonical(labels):
    """Label vector renumbered by first appearance, as a hashable key."""
    seen = {}
    return tuple(seen.setdefault(int(l), len(seen)) for l in labels)
