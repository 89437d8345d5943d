"""Model-based clustering of individuals' multivariate time-series panels."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .panel import (  # noqa: F401
    IndividualSeries,
    PanelDataset,
    SupervisedPairs,
    SyntheticSpec,
    chronological_split,
    filter_compliance,
    generate_synthetic,
    load_csv,
    make_folds,
    make_supervised_pairs,
    write_csv,
)
from .forecast import (  # noqa: F401
    ForecastModel,
    Hyperparameters,
    ModelKind,
    extract_parameters,
    fit_model,
    fit_series,
    predict,
    test_mse,
)
from .pdc import ClusterAssignment, ParameterMatrix, build_parameter_matrix, kmeans  # noqa: F401
from .poc import PocState, poc_init, poc_run, total_loss  # noqa: F401
from .evaluation import DistanceMatrix, ami, ari, dtw_distance, dtw_matrix, silhouette, stability  # noqa: F401
