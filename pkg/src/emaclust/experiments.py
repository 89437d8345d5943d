"""Baselines, the experiment grid, and summary tables.

A grid cell is one ``(approach, kind, k, iteration)`` combination. Its
recorded seed is ``base_seed + iteration``; the random stream actually
used inside the cell is derived from that seed together with a CRC32 of
the cell coordinates, so cells never share a stream.
"""

import csv
import json
import platform
import time
import zlib
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, EmaclustError, EmptyPanelError, InvalidKError, UndefinedMetricError
from .evaluation import ami, dtw_matrix, euclidean_distance_matrix, silhouette
from .forecast import Hyperparameters, ModelKind
from .panel import PanelDataset, filter_compliance, fit_scaler, make_folds
from .pdc import build_parameter_matrix, compact_labels, kmeans
from .poc import forward, poc_run, total_loss

__all__ = [
    "APPROACHES",
    "GROUPED",
    "ExperimentConfig",
    "ExperimentResult",
    "ExperimentContext",
    "prepare",
    "run_pdc",
    "run_poc",
    "run_random_clustering",
    "run_one_clustering",
    "run_n_clustering",
    "score_partition",
    "grid_cells",
    "run_grid",
    "load_results",
    "summarize",
    "write_report",
]

APPROACHES = ("pdc", "poc", "random", "one", "n")
GROUPED = ("pdc", "poc", "random")


@dataclass(frozen=True)
class ExperimentConfig:
    approaches: tuple = ("pdc", "poc")
    kinds: tuple = (ModelKind.VAR, ModelKind.RF, ModelKind.EBM)
    k_values: tuple = (2, 3, 4, 5, 6, 10, 15, 20)
    n_iterations: int = 10
    seed: int = 0
    test_fraction: float = 0.3
    hyper: Hyperparameters = field(default_factory=Hyperparameters)
    scale: bool = False
    dtw_normalize: bool = False
    holdout: str = "test"
    init: str = "farthest-first"
    poc_max_iter: int = 20
    kmeans_n_init: int = 1
    kmeans_max_iter: int = 300
    kmeans_tol: float = 1e-6
    standardize_params: bool = False
    min_compliance: float | None = 0.5
    full_length: int | None = None
    silhouettes: bool = True

    def __post_init__(self):
        approaches = tuple(str(a).lower() for a in self.approaches)
        bad = [a for a in approaches if a not in APPROACHES]
        if bad:
            raise ConfigError(f"unknown approach(es) {bad}; expected {APPROACHES}")
        object.__setattr__(self, "approaches", approaches)
        object.__setattr__(self, "kinds", tuple(ModelKind.parse(k) for k in self.kinds))
        object.__setattr__(self, "k_values", tuple(int(k) for k in self.k_values))
        if self.n_iterations < 1:
            raise ConfigError("n_iterations must be >= 1")
        if not 0 < self.test_fraction < 1:
            raise ConfigError("test_fraction must lie in (0, 1)")
        if self.holdout not in ("test", "validation"):
            raise ConfigError(f"holdout must be 'test' or 'validation', got {self.holdout!r}")
        if self.init not in ("farthest-first", "pairwise-first"):
            raise ConfigError(f"init must be 'farthest-first' or 'pairwise-first', got {self.init!r}")

    def to_dict(self):
        d = asdict(self)
        d["kinds"] = [k.value for k in self.kinds]
        d["approaches"] = list(self.approaches)
        d["k_values"] = list(self.k_values)
        return d


@dataclass
class ExperimentResult:
    approach: str
    kind: str
    k_given: int
    iteration: int
    seed: int
    k_effective: int | None = None
    total_loss: float | None = None
    silhouette_params: float | None = None
    silhouette_dtw: float | None = None
    labels: list = field(default_factory=list)
    valid: bool = False
    wall_time: float = 0.0
    termination: str | None = None
    error: str | None = None

    @property
    def key(self):
        return (self.approach, self.kind, self.k_given, self.iteration, self.seed)

    def to_dict(self):
        return asdict(self)

    def deterministic_dict(self):
        """Every field except the wall-clock timing."""
        d = asdict(self)
        d.pop("wall_time")
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


# ------------------------------------------------------------------- context


@dataclass(eq=False)
class ExperimentContext:
    """Panel, folds and lazily built shared artifacts for one grid."""

    ds: PanelDataset
    folds: list
    hyper: Hyperparameters
    seed: int = 0
    dtw_normalize: bool = False
    standardize_params: bool = False
    _params: dict = field(default_factory=dict)
    _param_dist: dict = field(default_factory=dict)
    _dtw: object = None

    @property
    def n(self):
        return len(self.folds)

    @property
    def train(self):
        return [f.train for f in self.folds]

    @property
    def test(self):
        return [f.test for f in self.folds]

    def params(self, kind):
        kind = ModelKind.parse(kind)
        if kind not in self._params:
            pm = build_parameter_matrix(self.ds, kind, self.hyper, self.seed, folds=self.folds)
            self._params[kind] = pm.standardized() if self.standardize_params else pm
        return self._params[kind]

    def param_distances(self, kind):
        kind = ModelKind.parse(kind)
        if kind not in self._param_dist:
            pm = self.params(kind)
            self._param_dist[kind] = euclidean_distance_matrix(pm.values, pm.ids)
        return self._param_dist[kind]

    def dtw(self):
        if self._dtw is None:
            self._dtw = dtw_matrix(self.ds, normalize=self.dtw_normalize)
        return self._dtw

    def warm(self, kinds, silhouettes=True, need_params=True):
        """Build shared artifacts up front; failures resurface inside the cells that need them."""
        for kind in kinds:
            if need_params:
                try:
                    self.param_distances(kind)
                except EmaclustError:
                    pass
        if silhouettes:
            try:
                self.dtw()
            except EmaclustError:
                pass
        return self


def prepare(ds, cfg=None):
    """Filter, optionally scale, and split ``ds`` according to ``cfg``."""
    cfg = cfg or ExperimentConfig()
    if ds is None or len(ds) == 0:
        raise EmptyPanelError("panel has no individuals")
    if cfg.min_compliance is not None:
        full = cfg.full_length or max(s.n_rows for s in ds)
        ds = filter_compliance(ds, cfg.min_compliance, full)
    folds = make_folds(ds, cfg.test_fraction, cfg.holdout)
    if cfg.scale:
        scaler = fit_scaler([f.train for f in folds])
        ds = scaler.transform(ds)
        folds = make_folds(ds, cfg.test_fraction, cfg.holdout)
    return ExperimentContext(
        ds, folds, cfg.hyper, cfg.seed, cfg.dtw_normalize, cfg.standardize_params
    )


def _as_context(ds, hyper, test_fraction):
    if isinstance(ds, ExperimentContext):
        return ds
    if ds is None or len(ds) == 0:
        raise EmptyPanelError("panel has no individuals")
    cfg = ExperimentConfig(hyper=hyper or Hyperparameters(), test_fraction=test_fraction, min_compliance=None)
    return prepare(ds, cfg)


def _cell_seed(seed, approach, kind, k):
    tag = zlib.crc32(f"{approach}/{ModelKind.parse(kind).value}/{k}".encode())
    return int(np.random.SeedSequence([int(seed), tag]).generate_state(1)[0])


def score_partition(ctx, kind, labels, seed):
    """Refit cluster models for ``labels`` and return their total test loss."""
    labels = compact_labels(labels)
    models = forward(labels, ctx.folds, kind, ctx.hyper, seed, ctx.ds.variable_names)
    return total_loss(labels, models, ctx.test), labels


def _silhouettes(ctx, kind, labels):
    out = []
    for dm in (lambda: ctx.param_distances(kind), ctx.dtw):
        try:
            out.append(silhouette(dm(), labels))
        except UndefinedMetricError:
            out.append(None)
    return out


def _result(approach, kind, k_given, iteration, seed, labels, loss, ctx, silhouettes, started, termination=None):
    k_eff = int(np.max(labels)) + 1
    res = ExperimentResult(
        approach=approach,
        kind=ModelKind.parse(kind).value,
        k_given=int(k_given),
        iteration=int(iteration),
        seed=int(seed),
        k_effective=k_eff,
        total_loss=float(loss),
        labels=[int(l) for l in labels],
        valid=k_eff == int(k_given),
        termination=termination,
    )
    if silhouettes:
        res.silhouette_params, res.silhouette_dtw = _silhouettes(ctx, kind, labels)
    res.wall_time = time.perf_counter() - started
    return res


def run_pdc(ctx, kind, k, seed, iteration=0, n_init=1, max_iter=300, tol=1e-6, silhouettes=False):
    started = time.perf_counter()
    inner = _cell_seed(seed, "pdc", kind, k)
    asg = kmeans(ctx.params(kind), k, n_init=n_init, max_iter=max_iter, tol=tol, seed=inner)
    loss, labels = score_partition(ctx, kind, asg.labels, inner)
    return _result("pdc", kind, k, iteration, seed, labels, loss, ctx, silhouettes, started)


def run_poc(ctx, kind, k, seed, iteration=0, max_iter=20, init="farthest-first", silhouettes=False,
            return_state=False):
    started = time.perf_counter()
    inner = _cell_seed(seed, "poc", kind, k)
    state = poc_run(ctx.ds, k, kind, ctx.hyper, max_iter=max_iter, seed=inner, folds=ctx.folds, init=init)
    best = state.best_so_far
    # in validation mode the optimized loss was measured on the validation part
    loss = total_loss(best.assignment.labels, best.cluster_models, ctx.test)
    res = _result(
        "poc", kind, k, iteration, seed, best.assignment.labels, loss, ctx, silhouettes, started,
        termination=state.termination,
    )
    return (res, state) if return_state else res


def run_random_clustering(ds, k, kind, hyper=None, seed=0, iteration=0, test_fraction=0.3, silhouettes=False):
    """Uniform random partition with every cluster seeded by one distinct individual."""
    started = time.perf_counter()
    ctx = _as_context(ds, hyper, test_fraction)
    n = ctx.n
    if not 1 <= k <= n:
        raise InvalidKError(f"k={k} must lie in [1, N={n}]")
    inner = _cell_seed(seed, "random", kind, k)
    rng = np.random.default_rng(inner)
    labels = rng.integers(0, k, size=n)
    anchors = rng.permutation(n)[:k]
    labels[anchors] = np.arange(k)
    loss, labels = score_partition(ctx, kind, labels, inner)
    return _result("random", kind, k, iteration, seed, labels, loss, ctx, silhouettes, started)


def run_one_clustering(ds, kind, hyper=None, seed=0, iteration=0, test_fraction=0.3, silhouettes=False):
    """One pooled model for everybody, scored on each individual's test part."""
    started = time.perf_counter()
    ctx = _as_context(ds, hyper, test_fraction)
    inner = _cell_seed(seed, "one", kind, 1)
    loss, labels = score_partition(ctx, kind, np.zeros(ctx.n, dtype=np.int64), inner)
    return _result("one", kind, 1, iteration, seed, labels, loss, ctx, silhouettes, started)


def run_n_clustering(ds, kind, hyper=None, seed=0, iteration=0, test_fraction=0.3, silhouettes=False):
    """A personalized model per individual, trained on its own train part."""
    started = time.perf_counter()
    ctx = _as_context(ds, hyper, test_fraction)
    inner = _cell_seed(seed, "n", kind, ctx.n)
    loss, labels = score_partition(ctx, kind, np.arange(ctx.n), inner)
    return _result("n", kind, ctx.n, iteration, seed, labels, loss, ctx, silhouettes, started)


# ----------------------------------------------------------------------- grid


def grid_cells(cfg, n):
    """All ``(approach, kind, k, iteration, seed)`` cells in canonical order."""
    cells = []
    for approach in cfg.approaches:
        for kind in cfg.kinds:
            if approach in GROUPED:
                ks = cfg.k_values
                for k in ks:
                    if not 2 <= k <= n - 1:
                        raise ConfigError(f"k={k} outside [2, N-1={n - 1}] for approach {approach}")
            else:
                ks = (1 if approach == "one" else n,)
            for k in ks:
                for it in range(cfg.n_iterations):
                    cells.append((approach, kind.value, int(k), it, cfg.seed + it))
    return cells


def _run_cell(ctx, cfg, cell):
    approach, kind, k, iteration, seed = cell
    sil = cfg.silhouettes
    started = time.perf_counter()
    try:
        if approach == "pdc":
            return run_pdc(ctx, kind, k, seed, iteration, cfg.kmeans_n_init, cfg.kmeans_max_iter, cfg.kmeans_tol, sil)
        if approach == "poc":
            return run_poc(ctx, kind, k, seed, iteration, cfg.poc_max_iter, cfg.init, sil)
        if approach == "random":
            return run_random_clustering(ctx, k, kind, seed=seed, iteration=iteration, silhouettes=sil)
        if approach == "one":
            return run_one_clustering(ctx, kind, seed=seed, iteration=iteration, silhouettes=sil)
        return run_n_clustering(ctx, kind, seed=seed, iteration=iteration, silhouettes=sil)
    except Exception as exc:  # a failed cell is recorded, never fatal
        return ExperimentResult(
            approach, kind, k, iteration, seed,
            wall_time=time.perf_counter() - started,
            error=f"{type(exc).__name__}: {exc}",
        )


_WORKER = {}


def _init_worker(ctx, cfg):
    _WORKER["ctx"], _WORKER["cfg"] = ctx, cfg


def _worker_cell(cell):
    return _run_cell(_WORKER["ctx"], _WORKER["cfg"], cell)


def _versions():
    import scipy
    import sklearn

    return {
        "emaclust": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "scikit-learn": sklearn.__version__,
    }


def load_results(path):
    path = Path(path)
    if not path.exists():
        return []
    out = []
    with path.open() as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(ExperimentResult.from_dict(json.loads(line)))
    return out


def run_grid(cfg, ds, out_path=None, jobs=1, progress=None):
    """Run every grid cell, appending each finished result to ``out_path``.

    Cells already present in ``out_path`` are not recomputed, so re-running
    the same config resumes rather than duplicates.
    """
    ctx = ds if isinstance(ds, ExperimentContext) else prepare(ds, cfg)
    cells = grid_cells(cfg, ctx.n)
    existing = {r.key: r for r in load_results(out_path)} if out_path else {}
    todo = [c for c in cells if c not in existing]
    if todo:
        need_params = cfg.silhouettes or "pdc" in cfg.approaches
        kinds = sorted({c[1] for c in todo})
        ctx.warm(kinds, silhouettes=cfg.silhouettes, need_params=need_params)

    fh = None
    if out_path:
        out_path = Path(out_path)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        meta = {"config": cfg.to_dict(), "n_individuals": ctx.n, "versions": _versions()}
        out_path.with_suffix(out_path.suffix + ".meta.json").write_text(json.dumps(meta, indent=2, default=str))
        fh = out_path.open("a")

    done = dict(existing)
    try:
        if jobs and jobs > 1 and len(todo) > 1:
            with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker, initargs=(ctx, cfg)) as pool:
                stream = pool.map(_worker_cell, todo)
                for res in stream:
                    done[res.key] = res
                    _emit(fh, res, progress)
        else:
            for cell in todo:
                res = _run_cell(ctx, cfg, cell)
                done[res.key] = res
                _emit(fh, res, progress)
    finally:
        if fh:
            fh.close()
    return [done[c] for c in cells]


def _emit(fh, res, progress):
    if fh:
        fh.write(json.dumps(res.to_dict()) + "\n")
        fh.flush()
    if progress:
        progress(res)


# -------------------------------------------------------------------- report

SCENARIO = {
    "pdc": "k-Clustering (PDC)",
    "poc": "k-Clustering (POC)",
    "random": "Random-Clustering",
    "one": "1-Clustering",
    "n": "N-Clustering",
}


def _mean(xs):
    xs = [x for x in xs if x is not None]
    return float(np.mean(xs)) if xs else None


def _stability_or_none(labelings):
    if len(labelings) < 2:
        return None
    scores = [ami(a, b) for i, a in enumerate(labelings) for b in labelings[i + 1 :]]
    return float(np.mean(scores))


def summarize(results):
    """Aggregate results into the summary and plot-ready tables (lists of dicts)."""
    ok = [r for r in results if r.error is None]
    groups = defaultdict(list)
    for r in ok:
        groups[(r.approach, r.kind, r.k_given)].append(r)
    order = sorted(groups, key=lambda g: (APPROACHES.index(g[0]), g[1], g[2]))

    table1, table2, sil, stab = [], [], [], []
    sil_long, loss_long, stab_long = [], [], []
    for key in order:
        approach, kind, k = key
        rs = groups[key]
        valid = [r for r in rs if r.valid]
        if approach in GROUPED:
            table1.append({
                "approach": approach, "kind": kind, "k_given": k,
                "mean_k_effective": _mean([r.k_effective for r in rs]),
                "n_iterations": len(rs), "n_valid": len(valid),
            })
        losses = [r.total_loss for r in rs]
        table2.append({
            "scenario": SCENARIO[approach], "approach": approach, "kind": kind, "k_given": k,
            "mean_total_loss": _mean(losses),
            "sd_total_loss": float(np.std(losses)) if losses else None,
            "mean_total_loss_valid": _mean([r.total_loss for r in valid]),
            "n_iterations": len(rs), "n_valid": len(valid),
        })
        for r in rs:
            loss_long.append({
                "approach": approach, "kind": kind, "k_given": k, "iteration": r.iteration,
                "total_loss": r.total_loss, "valid": r.valid,
            })
        for metric, attr in (("params", "silhouette_params"), ("dtw", "silhouette_dtw")):
            vals = [getattr(r, attr) for r in valid if getattr(r, attr) is not None]
            if vals:
                sil.append({
                    "approach": approach, "kind": kind, "k_given": k, "metric": metric,
                    "mean": float(np.mean(vals)), "min": float(np.min(vals)), "max": float(np.max(vals)),
                    "n_valid": len(vals),
                })
            for r in valid:
                if getattr(r, attr) is not None:
                    sil_long.append({
                        "approach": approach, "kind": kind, "k_given": k, "iteration": r.iteration,
                        "metric": metric, "silhouette": getattr(r, attr),
                    })
        if approach in GROUPED:
            s_valid = _stability_or_none([r.labels for r in valid])
            s_all = _stability_or_none([r.labels for r in rs])
            stab.append({
                "approach": approach, "kind": kind, "k_given": k,
                "stability": s_valid, "stability_all": s_all,
                "n_valid": len(valid), "n_iterations": len(rs),
            })
            for rule, value in (("valid", s_valid), ("all", s_all)):
                stab_long.append({"approach": approach, "kind": kind, "k_given": k, "rule": rule, "stability": value})

    return {
        "table1": table1,
        "table2": table2,
        "silhouette": sil,
        "stability": stab,
        "silhouette_vs_k": sil_long,
        "loss_vs_k": loss_long,
        "stability_vs_k": stab_long,
    }


def write_report(results, out_dir):
    """Write every table from :func:`summarize` as ``<name>.csv`` under ``out_dir``."""
    if not results:
        raise EmaclustError("no results")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, rows in summarize(results).items():
        path = out_dir / f"{name}.csv"
        fields = list(rows[0]) if rows else ["approach", "kind", "k_given"]
        with path.open("w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=fields)
            w.writeheader()
            for row in rows:
                w.writerow({k: ("" if v is None else v) for k, v in row.items()})
        written.append(path)
    return written
