from __future__ import annotations

import numpy as np
import pytest

from mmcompact.space import circle_grid, from_coords, random_cloud

_criteria: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    marker = getattr(report, "criterion", None)
    if marker is None:
        return
    number, title = marker
    outcome = "PASS" if report.passed else "FAIL"
    previous = _criteria.get(number, (title, "PASS"))[1]
    _criteria[number] = (title, "FAIL" if "FAIL" in (outcome, previous) else "PASS")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is not None:
        report.criterion = (m.args[0], m.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, outcome = _criteria[number]
        terminalreporter.write_line(f"criterion {number:2d} {outcome}: {title}")


@pytest.fixture
def s3():
    return from_coords([0.0, 1.0, 3.0])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def corpus():
    """Test spaces shared by the property suites."""
    return {
        "s3": from_coords([0.0, 1.0, 3.0]),
        "circle64": circle_grid(64),
        "circle256": circle_grid(256),
        "circle1024": circle_grid(1024),
        "cloud200": random_cloud(200, seed=1),
    }
