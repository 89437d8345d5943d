"""Cluster validity, agreement and time-series distances."""

from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import numpy as np
from scipy.special import gammaln

from .errors import InsufficientDataError, ShapeError, UndefinedMetricError
from .panel import IndividualSeries

__all__ = [
    "DistanceMatrix",
    "euclidean_distance_matrix",
    "dtw_distance",
    "dtw_matrix",
    "silhouette",
    "ami",
    "ari",
    "stability",
    "contingency",
]

METRIC_TAGS = ("euclidean-params", "dtw-raw")


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    values: np.ndarray
    metric_tag: str
    ids: tuple = ()

    def __post_init__(self):
        d = np.asarray(self.values, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ShapeError(f"distance matrix must be square, got {d.shape}")
        if not np.isfinite(d).all():
            raise ValueError("distance matrix has non-finite entries")
        if np.any(np.diag(d) != 0):
            raise ValueError("distance matrix diagonal must be exactly zero")
        if np.max(np.abs(d - d.T), initial=0.0) > 1e-12:
            raise ValueError("distance matrix is not symmetric")
        if np.any(d < 0):
            raise ValueError("distance matrix has negative entries")
        d.setflags(write=False)
        object.__setattr__(self, "values", d)
        object.__setattr__(self, "ids", tuple(self.ids))

    def __len__(self):
        return self.values.shape[0]

    def save(self, path):
        """Write to ``.npz`` (binary) or ``.csv`` depending on the suffix."""
        path = Path(path)
        if path.suffix == ".npz":
            np.savez(path, values=self.values, metric_tag=self.metric_tag, ids=np.array(self.ids, dtype=str))
        else:
            with path.open("w") as fh:
                fh.write(f"# metric_tag={self.metric_tag}\n")
                fh.write(",".join(["id", *self.ids]) + "\n")
                for i, row in enumerate(self.values):
                    label = self.ids[i] if self.ids else str(i)
                    fh.write(",".join([label, *(repr(float(x)) for x in row)]) + "\n")

    @classmethod
    def load(cls, path):
        path = Path(path)
        if path.suffix == ".npz":
            with np.load(path) as z:
                return cls(z["values"], str(z["metric_tag"]), tuple(z["ids"].tolist()))
        lines = path.read_text().splitlines()
        tag = lines[0].split("=", 1)[1]
        ids = tuple(lines[1].split(",")[1:])
        values = np.array([[float(x) for x in line.split(",")[1:]] for line in lines[2:]])
        return cls(values, tag, ids)


def euclidean_distance_matrix(x, ids=(), metric_tag="euclidean-params"):
    x = np.asarray(getattr(x, "values", x), dtype=float)
    diff = x[:, None, :] - x[None, :, :]
    d = np.sqrt((diff**2).sum(axis=2))
    d = np.triu(d, 1)
    return DistanceMatrix(d + d.T, metric_tag, ids)


# ------------------------------------------------------------------------ DTW


def _complete_rows(s):
    x = s.values if isinstance(s, IndividualSeries) else np.asarray(s, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    return x[~np.isnan(x).any(axis=1)]


def dtw_distance(a, b, normalize=False):
    """Unconstrained DTW with Euclidean local cost over complete rows.

    With ``normalize`` the accumulated cost is divided by the number of
    cells on the optimal warping path (ties between predecessors prefer
    the diagonal, then the vertical step).
    """
    x, y = _complete_rows(a), _complete_rows(b)
    if x.shape[1] != y.shape[1]:
        raise ShapeError(f"series have {x.shape[1]} and {y.shape[1]} variables")
    if len(x) == 0 or len(y) == 0:
        raise InsufficientDataError("a series has no complete rows")
    n, m = len(x), len(y)
    cost = np.sqrt(((x[:, None, :] - y[None, :, :]) ** 2).sum(axis=2))
    acc = np.full((n + 1, m + 1), np.inf)
    acc[0, 0] = 0.0
    steps = np.zeros((n + 1, m + 1))
    # sweep anti-diagonals; every cell on one depends only on the previous two
    for d in range(2, n + m + 1):
        i = np.arange(max(1, d - m), min(n, d - 1) + 1)
        j = d - i
        cand = np.stack([acc[i - 1, j - 1], acc[i - 1, j], acc[i, j - 1]])
        pick = np.argmin(cand, axis=0)
        acc[i, j] = cost[i - 1, j - 1] + cand[pick, np.arange(len(i))]
        if normalize:
            prev = np.stack([steps[i - 1, j - 1], steps[i - 1, j], steps[i, j - 1]])
            steps[i, j] = prev[pick, np.arange(len(i))] + 1
    total = float(acc[n, m])
    return total / steps[n, m] if normalize else total


def dtw_matrix(series, normalize=False):
    series = list(series)
    n = len(series)
    d = np.zeros((n, n))
    for i, j in combinations(range(n), 2):
        d[i, j] = d[j, i] = dtw_distance(series[i], series[j], normalize)
    return DistanceMatrix(d, "dtw-raw", tuple(s.id for s in series))


# ---------------------------------------------------------------- silhouette


def silhouette(dm, labels):
    """Mean silhouette; singletons score 0, as does ``a = b = 0``."""
    d = dm.values if isinstance(dm, DistanceMatrix) else np.asarray(dm, dtype=float)
    labels = np.asarray(labels)
    if len(labels) != d.shape[0]:
        raise ShapeError(f"{len(labels)} labels for a {d.shape[0]}x{d.shape[0]} distance matrix")
    clusters, codes = np.unique(labels, return_inverse=True)
    k = len(clusters)
    if k < 2:
        raise UndefinedMetricError("silhouette needs at least two clusters")
    onehot = np.eye(k)[codes]
    sums = d @ onehot
    counts = onehot.sum(axis=0)
    n = len(labels)
    own = counts[codes]
    a = np.where(own > 1, sums[np.arange(n), codes] / np.maximum(own - 1, 1), 0.0)
    mean_other = sums / counts
    mean_other[np.arange(n), codes] = np.inf
    b = mean_other.min(axis=1)
    top = np.maximum(a, b)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where((own > 1) & (top > 0), (b - a) / top, 0.0)
    return float(s.mean())


# ---------------------------------------------------------- partition agreement


def contingency(labels_a, labels_b):
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    if a.shape != b.shape or a.ndim != 1:
        raise ShapeError(f"label vectors have shapes {a.shape} and {b.shape}")
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ia.max() + 1, ib.max() + 1), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)
    return table


def _entropy(counts, n):
    p = counts[counts > 0] / n
    return float(-(p * np.log(p)).sum())


def _expected_mi(row_sums, col_sums, n):
    """Expected mutual information under the hypergeometric permutation model."""
    emi = 0.0
    lg_n = gammaln(n + 1)
    for ai in row_sums:
        for bj in col_sums:
            lo, hi = max(1, ai + bj - n), min(ai, bj)
            if lo > hi:
                continue
            nij = np.arange(lo, hi + 1, dtype=float)
            log_term = np.log(n * nij) - np.log(float(ai) * float(bj))
            log_p = (
                gammaln(ai + 1) + gammaln(bj + 1) + gammaln(n - ai + 1) + gammaln(n - bj + 1)
                - lg_n - gammaln(nij + 1) - gammaln(ai - nij + 1) - gammaln(bj - nij + 1)
                - gammaln(n - ai - bj + nij + 1)
            )
            emi += float(np.sum(nij / n * log_term * np.exp(log_p)))
    return emi


def _same_partition(table):
    return bool(np.all((table > 0).sum(axis=0) == 1) and np.all((table > 0).sum(axis=1) == 1))


def ami(labels_a, labels_b):
    """Adjusted mutual information with arithmetic-mean normalization."""
    table = contingency(labels_a, labels_b)
    n = int(table.sum())
    if n < 2:
        raise InsufficientDataError("AMI needs at least two labelled items")
    if _same_partition(table):
        return 1.0
    rows, cols = table.sum(axis=1), table.sum(axis=0)
    nz = table > 0
    nij = table[nz].astype(float)
    outer = np.outer(rows, cols)[nz].astype(float)
    mi = float(np.sum(nij / n * (np.log(n * nij) - np.log(outer))))
    emi = _expected_mi(rows, cols, n)
    denom = 0.5 * (_entropy(rows, n) + _entropy(cols, n)) - emi
    eps = np.finfo(float).eps
    denom = min(denom, -eps) if denom < 0 else max(denom, eps)
    value = (mi - emi) / denom
    if 1.0 < value <= 1.0 + 1e-12:
        value = 1.0
    return float(value)


def ari(labels_a, labels_b):
    """Adjusted Rand index from the contingency table."""
    table = contingency(labels_a, labels_b)
    n = int(table.sum())

    def pairs(x):
        x = np.asarray(x, dtype=np.int64)
        return int((x * (x - 1) // 2).sum())

    index = pairs(table.ravel())
    sum_a, sum_b = pairs(table.sum(axis=1)), pairs(table.sum(axis=0))
    total = n * (n - 1) // 2
    if total == 0:
        raise InsufficientDataError("ARI needs at least two labelled items")
    expected = sum_a * sum_b / total
    best = (sum_a + sum_b) / 2
    if best == expected:
        return 1.0
    return float((index - expected) / (best - expected))


def stability(labelings, metric=ami):
    """Mean pairwise agreement across repeated labelings."""
    labelings = [np.asarray(l) for l in labelings]
    if len(labelings) < 2:
        raise InsufficientDataError("stability needs at least two labelings")
    lengths = {len(l) for l in labelings}
    if len(lengths) != 1:
        raise ShapeError(f"labelings have different lengths {sorted(lengths)}")
    scores = [metric(a, b) for a, b in combinations(labelings, 2)]
    return float(np.mean(scores))
