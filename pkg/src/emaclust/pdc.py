"""Parameter-driven clustering: k-means over personalized-model parameters."""

from dataclasses import dataclass

import numpy as np

from .errors import EmaclustError, InvalidKError, InsufficientDataError
from .forecast import Hyperparameters, ModelKind, extract_parameters, fit_series
from .panel import make_folds, write_labels

__all__ = [
    "ParameterMatrix",
    "ClusterAssignment",
    "build_parameter_matrix",
    "kmeans",
    "compact_labels",
    "write_assignment",
]


@dataclass(frozen=True, eq=False)
class ParameterMatrix:
    """``N x V*V`` matrix; column ``u * V + v`` holds predictor ``u`` -> target ``v``."""

    values: np.ndarray
    ids: tuple
    kind: ModelKind | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] != len(self.ids):
            raise ValueError(f"values shape {values.shape} does not match {len(self.ids)} ids")
        if not np.isfinite(values).all():
            raise ValueError("parameter matrix has non-finite entries")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "ids", tuple(self.ids))

    def __len__(self):
        return self.values.shape[0]

    def standardized(self):
        """Copy with every column z-scored; constant columns become zero."""
        mu = self.values.mean(axis=0)
        sd = self.values.std(axis=0)
        sd = np.where(sd > 0, sd, 1.0)
        return ParameterMatrix((self.values - mu) / sd, self.ids, self.kind)


@dataclass(frozen=True, eq=False)
class ClusterAssignment:
    labels: np.ndarray
    k_given: int
    k_effective: int
    inertia_or_loss: float
    trace: tuple
    seed: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        present = np.unique(labels)
        if not np.array_equal(present, np.arange(self.k_effective)):
            raise ValueError(f"labels use clusters {present.tolist()}, expected 0..{self.k_effective - 1}")
        if self.k_effective > self.k_given:
            raise ValueError("k_effective exceeds k_given")
        if not self.trace:
            raise ValueError("trace must be nonempty")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "trace", tuple(float(t) for t in self.trace))


def compact_labels(labels):
    """Renumber cluster ids to ``0..k-1`` keeping their relative order."""
    labels = np.asarray(labels, dtype=np.int64)
    _, inverse = np.unique(labels, return_inverse=True)
    return inverse.astype(np.int64)


def build_parameter_matrix(ds, kind, hyper=None, seed=0, folds=None, test_fraction=0.3):
    """Fit a personalized model per individual on its train part and stack the flattened blocks."""
    kind = ModelKind.parse(kind)
    hyper = hyper or Hyperparameters()
    if folds is None:
        folds = make_folds(ds, test_fraction)
    rows = []
    for fold in folds:
        try:
            model = fit_series(kind, [fold.train], hyper, seed, ds.variable_names)
        except EmaclustError as exc:
            raise type(exc)(f"individual {fold.train.id!r}: {exc}") from exc
        rows.append(extract_parameters(model).ravel())
    return ParameterMatrix(np.vstack(rows), tuple(f.train.id for f in folds), kind)


def _sq_dists(x, centers):
    return ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)


def _kmeans_pp(x, k, rng):
    n = len(x)
    chosen = [int(rng.integers(n))]
    d2 = ((x - x[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        else:
            rest = np.setdiff1d(np.arange(n), chosen)
            idx = int(rng.choice(rest))
        chosen.append(idx)
        d2 = np.minimum(d2, ((x - x[idx]) ** 2).sum(axis=1))
    return x[chosen].astype(float)


def _repair_empty(labels, d, k):
    """Give each empty cluster the point farthest from its own centroid."""
    labels = labels.copy()
    cost = d[np.arange(len(labels)), labels]
    for j in range(k):
        if np.any(labels == j):
            continue
        counts = np.bincount(labels, minlength=k)
        movable = counts[labels] > 1
        cand = np.where(movable, cost, -np.inf)
        p = int(np.argmax(cand))
        labels[p] = j
        cost[p] = 0.0
    return labels


def _lloyd(x, k, max_iter, tol, rng):
    centers = _kmeans_pp(x, k, rng)
    trace = []
    labels = None
    for _ in range(max(1, max_iter)):
        d = _sq_dists(x, centers)
        labels = _repair_empty(np.argmin(d, axis=1), d, k)
        new_centers = np.vstack([x[labels == j].mean(axis=0) for j in range(k)])
        shift = float(np.sqrt(((new_centers - centers) ** 2).sum(axis=1)).max())
        centers = new_centers
        trace.append(float(((x - centers[labels]) ** 2).sum()))
        if shift < tol:
            break
    return labels, centers, trace


def kmeans(m, k, n_init=1, max_iter=300, tol=1e-6, seed=0):
    """Lloyd's algorithm with k-means++ seeding; best of ``n_init`` restarts by inertia."""
    x = m.values if isinstance(m, ParameterMatrix) else np.asarray(m, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = len(x)
    if not 1 <= k <= n:
        raise InvalidKError(f"k={k} must lie in [1, N={n}]")
    if n_init < 1:
        raise ValueError("n_init must be >= 1")
    best = None
    for child in np.random.SeedSequence(seed).spawn(n_init):
        labels, _, trace = _lloyd(x, k, max_iter, tol, np.random.default_rng(child))
        if best is None or trace[-1] < best[1][-1]:
            best = (labels, trace)
    labels, trace = best
    return ClusterAssignment(labels, k, k, trace[-1], tuple(trace), seed)


def write_assignment(path, ids, assignment):
    labels = assignment.labels if isinstance(assignment, ClusterAssignment) else assignment
    if len(ids) != len(labels):
        raise InsufficientDataError("ids and labels differ in length")
    write_labels(path, ids, labels, column="cluster")
