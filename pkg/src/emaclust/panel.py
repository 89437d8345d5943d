"""Panels of multivariate time series with missing observations.

An individual's data is a ``T_i x V`` float matrix in which ``NaN`` marks a
missing answer. ``NaN`` is never produced by parsing: numeric cells must be
finite, and only the configured missing token maps to ``NaN``.
"""

import csv
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import (
    DuplicateError,
    EmptyPanelError,
    InsufficientDataError,
    ParseError,
    SchemaError,
)

__all__ = [
    "IndividualSeries",
    "PanelDataset",
    "SupervisedPairs",
    "SyntheticSpec",
    "Fold",
    "Scaler",
    "load_csv",
    "write_csv",
    "read_labels",
    "write_labels",
    "filter_compliance",
    "make_supervised_pairs",
    "chronological_split",
    "make_folds",
    "fit_scaler",
    "generate_synthetic",
]


def _ceil_fraction(fraction, n):
    # round first so that e.g. 0.3 * 10 cannot become 4 through float error
    return math.ceil(round(fraction * n, 9))


def _readonly(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class IndividualSeries:
    """One individual's observations, rows ordered by ``time_index``."""

    id: str
    values: np.ndarray
    time_index: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise SchemaError(f"values of {self.id!r} must be 2-D, got shape {values.shape}")
        time_index = np.asarray(self.time_index)
        if time_index.ndim != 1 or len(time_index) != values.shape[0]:
            raise SchemaError(
                f"time_index of {self.id!r} has length {len(time_index)}, "
                f"expected {values.shape[0]}"
            )
        if not np.issubdtype(time_index.dtype, np.integer):
            if len(time_index) and not np.all(np.mod(time_index, 1) == 0):
                raise SchemaError(f"time_index of {self.id!r} must be integer")
            time_index = time_index.astype(np.int64)
        if np.any(np.diff(time_index) <= 0):
            raise SchemaError(f"time_index of {self.id!r} is not strictly increasing")
        if np.isinf(values).any():
            raise ParseError(f"values of {self.id!r} contain infinite entries")
        object.__setattr__(self, "values", _readonly(values))
        object.__setattr__(self, "time_index", _readonly(time_index.astype(np.int64)))

    @property
    def n_rows(self):
        return self.values.shape[0]

    @property
    def n_vars(self):
        return self.values.shape[1]

    @property
    def missing(self):
        """Boolean mask of missing entries."""
        return np.isnan(self.values)

    def rows(self, start, stop=None):
        """Sub-series over row positions ``start:stop``."""
        return IndividualSeries(self.id, self.values[start:stop], self.time_index[start:stop])

    @cached_property
    def lagged(self):
        """``(X, Y, t)`` for consecutive rows whose predictor row is complete.

        ``Y`` keeps ``NaN`` where the next-step target is missing, so the
        valid rows for target ``v`` are ``~isnan(Y[:, v])``.
        """
        x, y = self.values[:-1], self.values[1:]
        keep = ~np.isnan(x).any(axis=1)
        return _readonly(x[keep]), _readonly(y[keep]), _readonly(self.time_index[:-1][keep])

    @property
    def n_valid_pairs(self):
        y = self.lagged[1]
        return int((~np.isnan(y)).sum())


@dataclass(frozen=True, eq=False)
class PanelDataset:
    individuals: tuple
    variable_names: tuple

    def __post_init__(self):
        individuals = tuple(self.individuals)
        names = tuple(str(v) for v in self.variable_names)
        if not individuals:
            raise EmptyPanelError("panel has no individuals")
        ids = [s.id for s in individuals]
        if len(set(ids)) != len(ids):
            raise DuplicateError("individual ids are not unique")
        for s in individuals:
            if s.n_vars != len(names):
                raise SchemaError(
                    f"individual {s.id!r} has {s.n_vars} variables, expected {len(names)}"
                )
        object.__setattr__(self, "individuals", individuals)
        object.__setattr__(self, "variable_names", names)

    def __len__(self):
        return len(self.individuals)

    def __iter__(self) -> Iterator[IndividualSeries]:
        return iter(self.individuals)

    def __getitem__(self, i):
        return self.individuals[i]

    @property
    def ids(self):
        return tuple(s.id for s in self.individuals)

    @property
    def n_vars(self):
        return len(self.variable_names)

    def subset(self, indices):
        return PanelDataset(tuple(self.individuals[i] for i in indices), self.variable_names)

    def map(self, fn):
        """Apply ``fn`` to every individual, keeping variable names."""
        return PanelDataset(tuple(fn(s) for s in self.individuals), self.variable_names)


@dataclass(frozen=True, eq=False)
class SupervisedPairs:
    """Training pairs ``(x_t, x_{t+1}[v])`` for one target variable."""

    target_variable: int
    predictors: np.ndarray
    targets: np.ndarray
    individual_ids: tuple
    time_index: np.ndarray

    def __len__(self):
        return len(self.targets)

    @property
    def rows(self):
        return list(zip(self.predictors, self.targets, self.individual_ids, self.time_index))

    @classmethod
    def concat(cls, parts):
        parts = list(parts)
        if not parts:
            raise InsufficientDataError("no pairs to concatenate")
        v = parts[0].target_variable
        if any(p.target_variable != v for p in parts):
            raise ValueError("cannot concatenate pairs of different targets")
        return cls(
            v,
            np.concatenate([p.predictors for p in parts]),
            np.concatenate([p.targets for p in parts]),
            tuple(i for p in parts for i in p.individual_ids),
            np.concatenate([p.time_index for p in parts]),
        )


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a panel of grouped VAR(1) individuals."""

    n_groups: int = 2
    individuals_per_group: int = 10
    n_vars: int = 4
    length_range: tuple = (120, 160)
    noise_sd: float = 0.5
    within_group_perturbation_sd: float = 0.02
    missing_rate: float = 0.0
    spectral_radius_cap: float = 0.9

    def __post_init__(self):
        if self.n_groups < 1 or self.individuals_per_group < 1 or self.n_vars < 1:
            raise ValueError("n_groups, individuals_per_group and n_vars must be positive")
        t_min, t_max = self.length_range
        if t_min < 10 or t_max < t_min:
            raise ValueError(f"length_range must satisfy 10 <= T_min <= T_max, got {self.length_range}")
        if self.noise_sd < 0 or self.within_group_perturbation_sd < 0:
            raise ValueError("standard deviations must be nonnegative")
        if not 0 <= self.missing_rate < 1:
            raise ValueError("missing_rate must lie in [0, 1)")
        if not 0 < self.spectral_radius_cap < 1:
            raise ValueError("spectral_radius_cap must lie in (0, 1)")


@dataclass(frozen=True, eq=False)
class Fold:
    """Chronological split of one individual.

    ``select`` is the part used to score cluster membership; it is the test
    part itself unless a separate validation holdout was requested.
    """

    train: IndividualSeries
    select: IndividualSeries
    test: IndividualSeries


# --------------------------------------------------------------------------- io


def load_csv(path, missing_token=""):
    """Read a long-wide CSV ``individual_id,time_index,<var1>,...``."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        if len(header) < 3 or header[0] != "individual_id" or header[1] != "time_index":
            raise SchemaError(
                f"{path}: header must be individual_id,time_index,<var1>,..., got {header}"
            )
        names = header[2:]
        if len(set(names)) != len(names) or any(not n for n in names):
            raise SchemaError(f"{path}: variable names must be unique and nonempty")

        rows = {}
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise SchemaError(f"{path}:{lineno}: expected {len(header)} fields, got {len(rec)}")
            ind = rec[0].strip()
            try:
                t = int(rec[1])
            except ValueError:
                raise ParseError(
                    f"{path}:{lineno}: time_index {rec[1]!r} is not an integer", lineno, "time_index"
                ) from None
            vals = []
            for name, cell in zip(names, rec[2:]):
                cell = cell.strip()
                if cell == missing_token:
                    vals.append(np.nan)
                    continue
                try:
                    x = float(cell)
                except ValueError:
                    x = math.nan
                if not math.isfinite(x):
                    raise ParseError(f"{path}:{lineno}: column {name!r}: cannot parse {cell!r}", lineno, name)
                vals.append(x)
            per_ind = rows.setdefault(ind, {})
            if t in per_ind:
                raise DuplicateError(f"{path}:{lineno}: duplicate row for individual {ind!r}, t={t}")
            per_ind[t] = vals

    if not rows:
        raise EmptyPanelError(f"{path}: no data rows")
    individuals = []
    for ind, per_ind in rows.items():
        ts = sorted(per_ind)
        individuals.append(IndividualSeries(ind, np.array([per_ind[t] for t in ts], dtype=float), np.array(ts)))
    return PanelDataset(tuple(individuals), tuple(names))


def _fmt(x, missing_token):
    return missing_token if np.isnan(x) else repr(float(x))


def write_csv(ds, path, missing_token=""):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["individual_id", "time_index", *ds.variable_names])
        for s in ds:
            for t, row in zip(s.time_index, s.values):
                w.writerow([s.id, int(t), *(_fmt(x, missing_token) for x in row)])


def write_labels(path, ids, labels, column="cluster"):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["individual_id", column])
        for i, lab in zip(ids, labels):
            w.writerow([i, int(lab)])


def read_labels(path):
    """Read a two-column ``individual_id,<label>`` file into a dict."""
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) != 2 or header[0].strip() != "individual_id":
            raise SchemaError(f"{path}: expected header individual_id,<label>")
        out = {}
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            try:
                out[rec[0].strip()] = int(rec[1])
            except (ValueError, IndexError):
                raise ParseError(f"{path}:{lineno}: bad label row {rec}", lineno, header[1]) from None
    return out


# ------------------------------------------------------------------- transforms


def filter_compliance(ds, min_fraction, full_length):
    """Keep individuals with at least ``ceil(min_fraction * full_length)`` answered rows.

    A row counts as answered when any of its variables is observed.
    """
    if not 0 < min_fraction <= 1:
        raise ValueError(f"min_fraction must lie in (0, 1], got {min_fraction}")
    if full_length <= 0:
        raise ValueError("full_length must be positive")
    need = _ceil_fraction(min_fraction, full_length)
    kept = [s for s in ds if int((~s.missing.all(axis=1)).sum()) >= need]
    if not kept:
        raise EmptyPanelError(f"no individual has at least {need} answered rows")
    return PanelDataset(tuple(kept), ds.variable_names)


def make_supervised_pairs(series, target_variable):
    v = int(target_variable)
    if not 0 <= v < series.n_vars:
        raise IndexError(f"target_variable {v} out of range for V={series.n_vars}")
    x, y, t = series.lagged
    keep = ~np.isnan(y[:, v])
    if not keep.any():
        raise InsufficientDataError(
            f"individual {series.id!r} has no valid pair for target {v}"
        )
    return SupervisedPairs(v, x[keep], y[keep, v], (series.id,) * int(keep.sum()), t[keep])


def chronological_split(series, test_fraction):
    """Split off the last ``ceil(test_fraction * T_i)`` rows as the test part."""
    if not 0 < test_fraction < 1:
        raise ValueError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    n = series.n_rows
    n_test = _ceil_fraction(test_fraction, n)
    if n_test < 2 or n - n_test < 2:
        raise InsufficientDataError(
            f"individual {series.id!r}: {n} rows cannot be split into train/test of >= 2 rows"
        )
    return series.rows(0, n - n_test), series.rows(n - n_test)


def make_folds(ds, test_fraction=0.3, holdout="test", validation_fraction=0.2):
    """Split every individual; ``holdout='validation'`` carves a validation part off the train part."""
    folds = []
    for s in ds:
        train, test = chronological_split(s, test_fraction)
        if holdout == "test":
            folds.append(Fold(train, test, test))
        elif holdout == "validation":
            train, val = chronological_split(train, validation_fraction)
            folds.append(Fold(train, val, test))
        else:
            raise ValueError(f"unknown holdout mode {holdout!r}")
    return folds


@dataclass(frozen=True, eq=False)
class Scaler:
    mean: np.ndarray
    scale: np.ndarray

    def transform_series(self, s):
        return IndividualSeries(s.id, (s.values - self.mean) / self.scale, s.time_index)

    def transform(self, ds):
        return ds.map(self.transform_series)


def fit_scaler(series):
    """Per-variable z-scoring fitted on the pooled rows of ``series``."""
    stacked = np.concatenate([s.values for s in series])
    mean = np.nanmean(stacked, axis=0)
    sd = np.nanstd(stacked, axis=0)
    sd = np.where(np.isfinite(sd) & (sd > 0), sd, 1.0)
    return Scaler(np.nan_to_num(mean), sd)


# -------------------------------------------------------------------- synthetic


def _group_matrix(rng, v, cap):
    a = rng.uniform(-1.0, 1.0, size=(v, v))
    radius = np.max(np.abs(np.linalg.eigvals(a)))
    if radius > cap:
        a *= cap / radius
    return a


def generate_synthetic(spec, seed, return_matrices=False):
    """Simulate ``x_{t+1} = (A_g + E_i) x_t + eps_t`` for grouped individuals.

    Returns ``(panel, ground_truth)``; with ``return_matrices`` also the
    per-individual transition matrices ``A_g + E_i`` (rows index the
    next-step variable, so the matching VAR coefficient block is the
    transpose).
    """
    rng = np.random.default_rng(seed)
    v = spec.n_vars
    groups = [_group_matrix(rng, v, spec.spectral_radius_cap) for _ in range(spec.n_groups)]
    t_min, t_max = spec.length_range
    individuals, truth, matrices = [], [], []
    width = len(str(spec.n_groups * spec.individuals_per_group - 1))
    for g, a in enumerate(groups):
        for _ in range(spec.individuals_per_group):
            i = len(individuals)
            m = a + rng.normal(0.0, spec.within_group_perturbation_sd, size=(v, v))
            t_len = int(rng.integers(t_min, t_max + 1))
            x = np.empty((t_len, v))
            x[0] = rng.normal(0.0, 1.0, size=v)
            eps = rng.normal(0.0, spec.noise_sd, size=(t_len, v)) if spec.noise_sd > 0 else np.zeros((t_len, v))
            for t in range(1, t_len):
                x[t] = m @ x[t - 1] + eps[t]
            if spec.missing_rate > 0:
                x[rng.random((t_len, v)) < spec.missing_rate] = np.nan
            individuals.append(IndividualSeries(f"id{i:0{width}d}", x, np.arange(t_len)))
            truth.append(g)
            matrices.append(m)
    ds = PanelDataset(tuple(individuals), tuple(f"v{j}" for j in range(v)))
    if return_matrices:
        return ds, truth, matrices
    return ds, truth
