import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emaclust.errors import InsufficientDataError, ShapeError, SingularFitError
from emaclust.forecast import (
    Hyperparameters,
    ModelKind,
    _tree_importance,
    extract_parameters,
    fit_model,
    fit_series,
    mse_per_series,
    predict,
    test_mse as series_test_mse,
    write_coefficients,
)
from emaclust.panel import (
    SupervisedPairs,
    SyntheticSpec,
    chronological_split,
    generate_synthetic,
    make_supervised_pairs,
)

from conftest import make_series

FAST = Hyperparameters(n_trees=10, n_cycles=20, min_samples_leaf=3)


def var_series(m, t_len, rng, noise=0.0, id_="a"):
    v = m.shape[0]
    x = np.empty((t_len, v))
    x[0] = rng.normal(size=v)
    for t in range(1, t_len):
        x[t] = m @ x[t - 1] + noise * rng.normal(size=v)
    return make_series(id_, x)


def test_model_kind_parse():
    assert ModelKind.parse("VAR") is ModelKind.VAR
    assert ModelKind.parse(ModelKind.EBM) is ModelKind.EBM
    with pytest.raises(ValueError):
        ModelKind.parse("lstm")


@pytest.mark.parametrize(
    "kwargs",
    [{"ridge_lambda": -1}, {"n_trees": 0}, {"max_features": 0}, {"max_depth": 0}, {"n_cycles": -1},
     {"learning_rate": 0}, {"learning_rate": 1.5}, {"n_bins": 1}],
)
def test_hyperparameter_validation(kwargs):
    with pytest.raises(ValueError):
        Hyperparameters(**kwargs)


# ---------------------------------------------------------------------- VAR


def test_var_recovers_noiseless_matrix_exactly():
    rng = np.random.default_rng(0)
    m = np.array([[0.5, -0.2], [0.3, 0.4]])
    s = var_series(m, 60, rng)
    model = fit_series("var", [s], Hyperparameters(ridge_lambda=0.0))
    np.testing.assert_allclose(extract_parameters(model), m.T, atol=1e-10)
    assert abs(model.sub_models[0].intercept) < 1e-10


def test_var_intercept_is_not_penalized():
    x = np.arange(1.0, 21.0)
    s = make_series("a", np.column_stack([x, np.full(20, 5.0) + 0 * x]))
    # second variable is constant: its slope column is singular without ridge
    with pytest.raises(SingularFitError):
        fit_series("var", [s], Hyperparameters(ridge_lambda=0.0))
    model = fit_series("var", [s], Hyperparameters(ridge_lambda=1e-3))
    assert model.sub_models[1].intercept == pytest.approx(5.0, abs=1e-3)


def test_var_pooled_fit_on_pairs_matches_series_fit():
    rng = np.random.default_rng(1)
    m = np.array([[0.2, 0.1], [-0.4, 0.6]])
    series = [var_series(m, 40, rng, 0.3, id_=str(i)) for i in range(3)]
    a = fit_series("var", series)
    pairs = [SupervisedPairs.concat([make_supervised_pairs(s, v) for s in series]) for v in range(2)]
    b = fit_model("var", pairs)
    np.testing.assert_allclose(extract_parameters(a), extract_parameters(b), atol=1e-12)


def test_predict_vector_and_errors():
    rng = np.random.default_rng(2)
    m = np.array([[0.5, 0.0], [0.0, 0.5]])
    model = fit_series("var", [var_series(m, 30, rng, 0.1)], Hyperparameters(ridge_lambda=0.0))
    np.testing.assert_allclose(predict(model, [2.0, -4.0]), model.predict_rows(np.array([[2.0, -4.0]]))[0])
    with pytest.raises(ShapeError):
        predict(model, [1.0])
    with pytest.raises(ValueError):
        predict(model, [np.nan, 1.0])
    with pytest.raises(ShapeError):
        model.predict_rows(np.zeros((3, 3)))


def test_mse_denominator_counts_valid_pairs():
    s = make_series("a", [[1.0, 1.0], [2.0, np.nan], [3.0, 3.0], [4.0, 4.0]])
    rng = np.random.default_rng(7)
    model = fit_series("var", [make_series("t", rng.normal(size=(30, 2)))])
    # valid targets: (0->1, v0), (2->3, v0), (2->3, v1); predictor row 1 incomplete
    pred = model.predict_rows(np.array([[1.0, 1.0], [3.0, 3.0]]))
    expected = ((2.0 - pred[0, 0]) ** 2 + (4.0 - pred[1, 0]) ** 2 + (4.0 - pred[1, 1]) ** 2) / 3
    assert series_test_mse(model, s) == pytest.approx(expected)


def test_mse_without_valid_pairs_raises():
    x = np.arange(1.0, 30.0)
    model = fit_series("var", [make_series("t", x)])
    with pytest.raises(InsufficientDataError):
        mse_per_series(model, [make_series("a", [[1.0], [np.nan]])])


def test_fit_model_checks_inputs():
    s = make_series("a", [[1.0, 2.0], [2.0, 3.0], [3.0, 1.0]])
    p0, p1 = make_supervised_pairs(s, 0), make_supervised_pairs(s, 1)
    with pytest.raises(ShapeError):
        fit_model("var", [p1, p0])
    with pytest.raises(InsufficientDataError):
        fit_series("var", [])


def test_write_coefficients(tmp_path):
    rng = np.random.default_rng(3)
    model = fit_series("var", [var_series(np.eye(2) * 0.5, 30, rng, 0.1)], variable_names=("p", "q"))
    path = tmp_path / "coef.csv"
    write_coefficients(model, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "predictor,p,q"
    assert lines[1].startswith("intercept,")
    with pytest.raises(ValueError):
        write_coefficients(fit_series("ebm", [var_series(np.eye(2) * 0.5, 30, rng, 0.1)], FAST), path)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 4), st.integers(50, 90))
def test_var_exactness_property(seed, v, t_len):
    spec = SyntheticSpec(n_groups=1, individuals_per_group=1, n_vars=v, length_range=(t_len, t_len),
                         noise_sd=0.0, within_group_perturbation_sd=0.0)
    ds, _, mats = generate_synthetic(spec, seed, return_matrices=True)
    train, test = chronological_split(ds[0], 0.3)
    model = fit_series("var", [train], Hyperparameters(ridge_lambda=0.0))
    np.testing.assert_allclose(extract_parameters(model), mats[0].T, atol=1e-8)
    assert series_test_mse(model, test) < 1e-12


# ----------------------------------------------------------------------- RF


def test_rf_importance_normalizes_to_sklearn():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(200, 3))
    s = make_series("a", x)
    model = fit_series("rf", [s], Hyperparameters(n_trees=5, min_samples_leaf=2, max_features=3))
    forest = model.sub_models[0].forest
    for est in forest.estimators_:
        imp = _tree_importance(est, 3)
        np.testing.assert_allclose(imp / imp.sum(), est.feature_importances_, atol=1e-12)


def test_rf_learns_strong_signal_and_is_seeded():
    rng = np.random.default_rng(5)
    m = np.array([[0.9, 0.0], [0.0, 0.0]])
    s = var_series(m, 300, rng, 0.2)
    a = fit_series("rf", [s], FAST, seed=1)
    b = fit_series("rf", [s], FAST, seed=1)
    np.testing.assert_array_equal(extract_parameters(a), extract_parameters(b))
    block = extract_parameters(a)
    assert np.all(block >= 0)
    assert block[0, 0] > block[1, 0]


def test_rf_too_few_rows():
    s = make_series("a", [[1.0], [2.0], [3.0]])
    with pytest.raises(InsufficientDataError):
        fit_series("rf", [s], Hyperparameters(min_samples_leaf=5))


# ---------------------------------------------------------------------- EBM


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_ebm_trace_non_increasing(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(int(rng.integers(30, 120)), 3))
    s = make_series("a", x)
    model = fit_series("ebm", [s], Hyperparameters(n_cycles=30, n_bins=16))
    for v, sub in enumerate(model.sub_models):
        assert np.all(np.diff(sub.trace) <= 1e-12)
        assert sub.trace[0] == pytest.approx(np.var(x[1:, v]))


def test_ebm_zero_cycles_predicts_mean():
    x = np.arange(10.0)[:, None] ** 2
    model = fit_series("ebm", [make_series("a", x)], Hyperparameters(n_cycles=0))
    np.testing.assert_allclose(model.predict_rows(np.array([[0.0], [50.0]])), np.mean(x[1:]))
    assert np.all(extract_parameters(model) == 0)


def test_ebm_fits_step_function():
    rng = np.random.default_rng(6)
    x = rng.uniform(-1, 1, size=400)
    series = make_series("a", np.column_stack([x, np.r_[0.0, np.where(x[:-1] > 0, 1.0, -1.0)]]))
    model = fit_series("ebm", [series], Hyperparameters(n_cycles=100, learning_rate=0.3))
    pred = model.predict_rows(np.array([[0.5, 0.0], [-0.5, 0.0]]))[:, 1]
    np.testing.assert_allclose(pred, [1.0, -1.0], atol=0.05)
    imp = extract_parameters(model)[:, 1]
    assert imp[0] > 10 * imp[1]
