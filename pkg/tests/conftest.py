import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from flowsentry.datasets import make_synthetic_flows, write_flow_csv  # noqa: E402


@pytest.fixture(scope="session")
def synth_small():
    """1200 synthetic rows, 8 features; quick to train on."""
    return make_synthetic_flows(n_samples=1200, n_features=8, separation=1.5, seed=3)


@pytest.fixture(scope="session")
def synth_csv(tmp_path_factory, synth_small):
    path = tmp_path_factory.mktemp("data") / "flows.csv"
    write_flow_csv(synth_small, path)
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def write_csv(path, text):
    path = Path(path)
    path.write_text(text)
    return path


# ---------------------------------------------------------------- acceptance summary

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion checked by this test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, title = mark.args
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[rep.outcome]
        _CRITERIA[n] = (status, title)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        status, title = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n}: {status}  {title}")
