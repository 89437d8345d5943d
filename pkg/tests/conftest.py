import sys
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import ortho_group

sys.path.insert(0, str(Path(__file__).parent))

from emaclust.panel import IndividualSeries, PanelDataset, SyntheticSpec, generate_synthetic  # noqa: E402

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, text): acceptance criterion checked by this test")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    number = getattr(report, "criterion", None)
    if number is not None:
        _CRITERIA[number] = (report.outcome, report.criterion_text, report.duration)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        rep.criterion = marker.args[0]
        rep.criterion_text = marker.args[1]


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        outcome, text, duration = _CRITERIA[number]
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {number:>2}: {text} ({duration:.1f}s)")


def make_series(id_, values, time_index=None):
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    if time_index is None:
        time_index = np.arange(len(values))
    return IndividualSeries(id_, values, np.asarray(time_index))


def noiseless_groups(per_group, n_vars, lengths, seed):
    """Two noiseless groups whose matrices are scaled orthogonal, so trajectories decay slowly.

    Returns ``(panel, truth, matrices)`` like ``generate_synthetic``.
    """
    rng = np.random.default_rng(seed)
    if n_vars == 1:
        mats = [np.array([[0.97]]), np.array([[-0.97]])]
    else:
        mats = [0.97 * ortho_group.rvs(n_vars, random_state=rng) for _ in range(2)]
    individuals, truth, per_ind = [], [], []
    for g, m in enumerate(mats):
        for _ in range(per_group):
            t_len = int(rng.integers(*lengths))
            x = np.empty((t_len, n_vars))
            x[0] = rng.normal(size=n_vars)
            for t in range(1, t_len):
                x[t] = m @ x[t - 1]
            individuals.append(make_series(f"id{len(individuals)}", x))
            truth.append(g)
            per_ind.append(m)
    return PanelDataset(tuple(individuals), tuple(f"v{j}" for j in range(n_vars))), truth, per_ind


@pytest.fixture
def two_group_noiseless():
    return noiseless_groups(5, 3, (50, 70), 11)


@pytest.fixture
def noisy_panel():
    spec = SyntheticSpec(
        n_groups=2, individuals_per_group=6, n_vars=3, length_range=(80, 100),
        noise_sd=0.5, within_group_perturbation_sd=0.02, missing_rate=0.05,
    )
    return generate_synthetic(spec, 3)


@pytest.fixture
def tiny_panel():
    a = make_series("a", [[1.0, 2.0], [2.0, 3.0], [3.0, 5.0], [4.0, 4.0], [5.0, 6.0]])
    b = make_series("b", [[0.0, 1.0], [1.0, 1.5], [0.5, 2.5], [1.5, 0.5], [2.0, 1.0]])
    return PanelDataset((a, b), ("x", "y"))
