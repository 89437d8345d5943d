"""INI-style experiment configuration.

Every key lives in a section named after the part of the pipeline it
controls. Unknown sections or keys are rejected. Example::

    [experiment]
    approaches = pdc, poc
    models = var, rf, ebm
    k_values = 2, 3, 5
    iterations = 10
    seed = 0
    jobs = 1
    data = panel.csv
    out = results.jsonl

    [panel]
    test_fraction = 0.3
    min_compliance = 0.5
    # full_length defaults to the longest individual
    full_length =
    holdout = test
    scale = false
    missing_token =

    [var]
    ridge_lambda = 1e-6

    [rf]
    n_trees = 100
    min_samples_leaf = 5
    # max_features defaults to ceil(V / 3); max_depth to unlimited
    max_features =
    max_depth =

    [ebm]
    n_cycles = 100
    learning_rate = 0.1
    n_bins = 64

    [pdc]
    n_init = 1
    max_iter = 300
    tol = 1e-6
    standardize = false

    [poc]
    max_iter = 20
    init = farthest-first

    [evaluation]
    dtw_normalize = false
    silhouettes = true
"""

import configparser
from pathlib import Path

from .errors import ConfigError
from .experiments import ExperimentConfig
from .forecast import Hyperparameters

__all__ = ["SCHEMA", "read_config", "build_config"]


def _list(cast):
    def parse(text):
        items = [t.strip() for t in text.replace(";", ",").split(",")]
        return tuple(cast(t) for t in items if t)

    return parse


def _optional(cast):
    def parse(text):
        text = text.strip()
        return None if text == "" or text.lower() == "none" else cast(text)

    return parse


def _bool(text):
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


SCHEMA = {
    "experiment": {
        "approaches": _list(str),
        "models": _list(str),
        "k_values": _list(int),
        "iterations": int,
        "seed": int,
        "jobs": int,
        "data": str,
        "out": str,
    },
    "panel": {
        "test_fraction": float,
        "min_compliance": _optional(float),
        "full_length": _optional(int),
        "holdout": str,
        "scale": _bool,
        "missing_token": str,
    },
    "var": {"ridge_lambda": float},
    "rf": {
        "n_trees": int,
        "min_samples_leaf": int,
        "max_features": _optional(int),
        "max_depth": _optional(int),
    },
    "ebm": {"n_cycles": int, "learning_rate": float, "n_bins": int},
    "pdc": {"n_init": int, "max_iter": int, "tol": float, "standardize": _bool},
    "poc": {"max_iter": int, "init": str},
    "evaluation": {"dtw_normalize": _bool, "silhouettes": _bool},
}


def read_config(path):
    """Parse ``path`` into a ``{(section, key): value}`` dict."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file {path} does not exist")
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    out = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
            try:
                out[(section, key)] = SCHEMA[section][key](raw)
            except ValueError as exc:
                raise ConfigError(f"{path}: [{section}] {key}: {exc}") from None
    return out


def build_config(settings):
    """Turn a settings dict into ``(ExperimentConfig, extras)``.

    ``extras`` carries the keys that are not part of the grid itself:
    ``data``, ``out``, ``jobs`` and ``missing_token``.
    """
    def get(section, key, default):
        return settings.get((section, key), default)

    base = Hyperparameters()
    try:
        hyper = Hyperparameters(
            ridge_lambda=get("var", "ridge_lambda", base.ridge_lambda),
            n_trees=get("rf", "n_trees", base.n_trees),
            min_samples_leaf=get("rf", "min_samples_leaf", base.min_samples_leaf),
            max_features=get("rf", "max_features", base.max_features),
            max_depth=get("rf", "max_depth", base.max_depth),
            n_cycles=get("ebm", "n_cycles", base.n_cycles),
            learning_rate=get("ebm", "learning_rate", base.learning_rate),
            n_bins=get("ebm", "n_bins", base.n_bins),
        )
        d = ExperimentConfig(hyper=hyper)
        cfg = ExperimentConfig(
            approaches=get("experiment", "approaches", d.approaches),
            kinds=get("experiment", "models", d.kinds),
            k_values=get("experiment", "k_values", d.k_values),
            n_iterations=get("experiment", "iterations", d.n_iterations),
            seed=get("experiment", "seed", d.seed),
            test_fraction=get("panel", "test_fraction", d.test_fraction),
            hyper=hyper,
            scale=get("panel", "scale", d.scale),
            dtw_normalize=get("evaluation", "dtw_normalize", d.dtw_normalize),
            holdout=get("panel", "holdout", d.holdout),
            init=get("poc", "init", d.init),
            poc_max_iter=get("poc", "max_iter", d.poc_max_iter),
            kmeans_n_init=get("pdc", "n_init", d.kmeans_n_init),
            kmeans_max_iter=get("pdc", "max_iter", d.kmeans_max_iter),
            kmeans_tol=get("pdc", "tol", d.kmeans_tol),
            standardize_params=get("pdc", "standardize", d.standardize_params),
            min_compliance=get("panel", "min_compliance", d.min_compliance),
            full_length=get("panel", "full_length", d.full_length),
            silhouettes=get("evaluation", "silhouettes", d.silhouettes),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    extras = {
        "data": get("experiment", "data", None),
        "out": get("experiment", "out", None),
        "jobs": get("experiment", "jobs", 1),
        "missing_token": get("panel", "missing_token", ""),
    }
    return cfg, extras
