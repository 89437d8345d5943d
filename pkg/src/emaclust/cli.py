"""Command-line entry point: ``emaclust {generate,cluster,evaluate,experiment,report}``.

Exit status is 0 on success, 2 for usage problems (bad flags, missing
files, invalid config) and 1 when the computation itself fails. Failures
are reported on stderr as a one-line JSON object.
"""

import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import build_config, read_config
from .errors import ConfigError, EmaclustError
from .evaluation import ami, ari, dtw_matrix, euclidean_distance_matrix, silhouette
from .experiments import (
    APPROACHES,
    GROUPED,
    _versions,
    load_results,
    prepare,
    run_grid,
    run_n_clustering,
    run_one_clustering,
    run_pdc,
    run_poc,
    run_random_clustering,
    score_partition,
    write_report,
)
from .panel import SyntheticSpec, generate_synthetic, load_csv, read_labels, write_csv, write_labels
from .pdc import build_parameter_matrix

MODELS = ("var", "rf", "ebm")


class UsageError(Exception):
    pass


def _add_panel_flags(p):
    p.add_argument("--data", default="panel.csv", help="panel CSV (default: panel.csv)")
    p.add_argument("--test-fraction", type=float, default=None, help="test share per individual (default 0.3)")
    p.add_argument("--min-compliance", type=float, default=None, help="minimum answered-row share (default 0.5)")
    p.add_argument("--holdout", choices=("test", "validation"), default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None, help="optional INI file with model/panel settings")


def build_parser():
    parser = argparse.ArgumentParser(prog="emaclust", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"emaclust {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic panel and its ground truth")
    g.add_argument("--groups", type=int, default=2)
    g.add_argument("--per-group", type=int, default=10)
    g.add_argument("--vars", type=int, default=4)
    g.add_argument("--length-min", type=int, default=120)
    g.add_argument("--length-max", type=int, default=160)
    g.add_argument("--noise-sd", type=float, default=0.5)
    g.add_argument("--perturbation-sd", type=float, default=0.02)
    g.add_argument("--missing-rate", type=float, default=0.0)
    g.add_argument("--spectral-radius", type=float, default=0.9)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default=".", help="output directory (panel.csv, ground_truth.csv)")

    c = sub.add_parser("cluster", help="run one approach and write labels")
    _add_panel_flags(c)
    c.add_argument("--approach", choices=APPROACHES, default="poc")
    c.add_argument("--model", choices=MODELS, default="var")
    c.add_argument("--k", type=int, default=None)
    c.add_argument("--init", choices=("farthest-first", "pairwise-first"), default=None)
    c.add_argument("--out", default=".", help="output directory (labels.csv, cluster_meta.json)")

    e = sub.add_parser("evaluate", help="score a labelling")
    _add_panel_flags(e)
    e.add_argument("--labels", default="labels.csv")
    e.add_argument("--against", default=None, help="reference labels, e.g. ground_truth.csv")
    e.add_argument("--model", choices=MODELS, default="var")
    e.add_argument("--metrics", default="silhouette,ami,ari,loss")
    e.add_argument("--dtw-normalize", action="store_true", default=None)

    x = sub.add_parser("experiment", help="run the experiment grid from a config file")
    x.add_argument("--config", required=True)
    x.add_argument("--data", default=None)
    x.add_argument("--out", default=None, help="results JSON-lines file")
    x.add_argument("--approach", default=None, help="comma-separated subset of " + ",".join(APPROACHES))
    x.add_argument("--model", default=None, help="comma-separated subset of var,rf,ebm")
    x.add_argument("--k", default=None, help="comma-separated k values")
    x.add_argument("--iterations", type=int, default=None)
    x.add_argument("--seed", type=int, default=None)
    x.add_argument("--test-fraction", type=float, default=None)
    x.add_argument("--min-compliance", type=float, default=None)
    x.add_argument("--jobs", type=int, default=None)
    x.add_argument("--dtw-normalize", action="store_true", default=None)
    x.add_argument("--holdout", choices=("test", "validation"), default=None)
    x.add_argument("--init", choices=("farthest-first", "pairwise-first"), default=None)

    r = sub.add_parser("report", help="aggregate results into summary CSVs")
    r.add_argument("--results", default="results.jsonl")
    r.add_argument("--out", default="report")
    return parser


def _settings(args, extra=()):
    settings = read_config(args.config) if getattr(args, "config", None) else {}
    flags = {
        ("panel", "test_fraction"): getattr(args, "test_fraction", None),
        ("panel", "min_compliance"): getattr(args, "min_compliance", None),
        ("panel", "holdout"): getattr(args, "holdout", None),
        ("experiment", "seed"): getattr(args, "seed", None),
        ("poc", "init"): getattr(args, "init", None),
        ("evaluation", "dtw_normalize"): getattr(args, "dtw_normalize", None),
        **dict(extra),
    }
    settings.update({k: v for k, v in flags.items() if v is not None})
    return settings


def _existing(path, what):
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"{what} {path} does not exist")
    return path


def _load_panel(path, missing_token):
    return load_csv(_existing(path, "data file"), missing_token)


def cmd_generate(args):
    spec = SyntheticSpec(
        n_groups=args.groups,
        individuals_per_group=args.per_group,
        n_vars=args.vars,
        length_range=(args.length_min, args.length_max),
        noise_sd=args.noise_sd,
        within_group_perturbation_sd=args.perturbation_sd,
        missing_rate=args.missing_rate,
        spectral_radius_cap=args.spectral_radius,
    )
    ds, truth = generate_synthetic(spec, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(ds, out / "panel.csv")
    write_labels(out / "ground_truth.csv", ds.ids, truth, column="group")
    meta = {"command": "generate", "spec": vars(spec), "seed": args.seed, "versions": _versions()}
    (out / "generate_meta.json").write_text(json.dumps(meta, indent=2, default=list))
    print(f"wrote {len(ds)} individuals to {out / 'panel.csv'}")
    return 0


def cmd_cluster(args):
    approach = args.approach
    if approach in GROUPED and (args.k is None or args.k < 2):
        raise UsageError(f"--approach {approach} needs --k >= 2 (use --approach one for a single cluster)")
    settings = _settings(args)
    cfg, extras = build_config(settings)
    ds = _load_panel(args.data, extras["missing_token"])
    ctx = prepare(ds, cfg)
    if approach in GROUPED and args.k > ctx.n:
        raise UsageError(f"--k {args.k} exceeds the {ctx.n} individuals available")
    seed = cfg.seed
    kind = args.model
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    extra = {}
    if approach == "pdc":
        res = run_pdc(ctx, kind, args.k, seed, 0, cfg.kmeans_n_init, cfg.kmeans_max_iter, cfg.kmeans_tol)
    elif approach == "poc":
        res, state = run_poc(ctx, kind, args.k, seed, 0, cfg.poc_max_iter, cfg.init, return_state=True)
        state.write_json(out / "poc_trace.json")
        extra["trace"] = state.to_json()
    elif approach == "random":
        res = run_random_clustering(ctx, args.k, kind, seed=seed)
    elif approach == "one":
        res = run_one_clustering(ctx, kind, seed=seed)
    else:
        res = run_n_clustering(ctx, kind, seed=seed)
    write_labels(out / "labels.csv", ctx.ds.ids, res.labels, column="cluster")
    meta = {
        "command": "cluster",
        "approach": approach,
        "model": kind,
        "k_given": res.k_given,
        "k_effective": res.k_effective,
        "total_loss": res.total_loss,
        "seed": seed,
        "config": cfg.to_dict(),
        "data": str(args.data),
        "versions": _versions(),
        **extra,
    }
    (out / "cluster_meta.json").write_text(json.dumps(meta, indent=2, default=str))
    print(json.dumps({"k_given": res.k_given, "k_effective": res.k_effective, "total_loss": res.total_loss}))
    return 0


def _aligned(ids, mapping, path):
    missing = [i for i in ids if i not in mapping]
    if missing:
        raise UsageError(f"{path} lacks labels for {len(missing)} individual(s), e.g. {missing[0]!r}")
    return np.array([mapping[i] for i in ids])


def cmd_evaluate(args):
    settings = _settings(args)
    cfg, extras = build_config(settings)
    mapping = read_labels(_existing(args.labels, "labels file"))
    ds = _load_panel(args.data, extras["missing_token"])
    ds = ds.subset([i for i, s in enumerate(ds) if s.id in mapping])
    ctx = prepare(ds, replace(cfg, min_compliance=None))
    ids = ctx.ds.ids
    labels = _aligned(ids, mapping, args.labels)
    metrics = {m.strip() for m in args.metrics.split(",") if m.strip()}
    unknown = metrics - {"silhouette", "ami", "ari", "loss"}
    if unknown:
        raise UsageError(f"unknown metrics {sorted(unknown)}")
    report = {"n": len(ids), "k": int(len(np.unique(labels)))}
    if "silhouette" in metrics and report["k"] >= 2:
        pm = build_parameter_matrix(ctx.ds, args.model, ctx.hyper, cfg.seed, folds=ctx.folds)
        report["silhouette_params"] = silhouette(euclidean_distance_matrix(pm.values), labels)
        report["silhouette_dtw"] = silhouette(dtw_matrix(ctx.ds, normalize=cfg.dtw_normalize), labels)
    if "loss" in metrics:
        report["total_loss"], _ = score_partition(ctx, args.model, labels, cfg.seed)
    if args.against:
        truth = _aligned(ids, read_labels(_existing(args.against, "reference file")), args.against)
        if "ami" in metrics:
            report["ami"] = ami(labels, truth)
        if "ari" in metrics:
            report["ari"] = ari(labels, truth)
    for key, value in report.items():
        print(f"{key}: {value:.6g}" if isinstance(value, float) else f"{key}: {value}")
    return 0


def cmd_experiment(args):
    extra = {
        ("experiment", "iterations"): args.iterations,
        ("experiment", "jobs"): args.jobs,
        ("experiment", "data"): args.data,
        ("experiment", "out"): args.out,
    }
    if args.approach:
        extra[("experiment", "approaches")] = tuple(a.strip() for a in args.approach.split(",") if a.strip())
    if args.model:
        extra[("experiment", "models")] = tuple(m.strip() for m in args.model.split(",") if m.strip())
    if args.k:
        try:
            extra[("experiment", "k_values")] = tuple(int(k) for k in args.k.split(",") if k.strip())
        except ValueError:
            raise UsageError(f"--k expects comma-separated integers, got {args.k!r}") from None
    cfg, extras = build_config(_settings(args, extra))
    if not extras["data"]:
        raise UsageError("no data file: set [experiment] data or pass --data")
    ds = _load_panel(extras["data"], extras["missing_token"])
    out = extras["out"] or "results.jsonl"
    started = time.perf_counter()
    results = run_grid(cfg, ds, out_path=out, jobs=extras["jobs"] or 1)
    failed = sum(r.error is not None for r in results)
    print(f"{len(results)} results ({failed} failed) in {time.perf_counter() - started:.1f}s -> {out}")
    return 0


def cmd_report(args):
    path = _existing(args.results, "results file")
    results = load_results(path)
    if not results:
        raise EmaclustError("no results")
    written = write_report(results, args.out)
    for p in written:
        print(p)
    return 0


COMMANDS = {
    "generate": cmd_generate,
    "cluster": cmd_cluster,
    "evaluate": cmd_evaluate,
    "experiment": cmd_experiment,
    "report": cmd_report,
}


def _fail(code, exc):
    print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
    return code


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError, FileNotFoundError) as exc:
        return _fail(2, exc)
    except (EmaclustError, ValueError) as exc:
        return _fail(1, exc)


if __name__ == "__main__":
    sys.exit(main())
