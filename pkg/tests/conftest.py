"""Shared fixtures, the hypothesis profile and the acceptance summary."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("default")

_RESULTS: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    entry = _RESULTS.setdefault(number, {"title": title, "states": [], "notes": []})
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        entry["states"].append(report.outcome)
        entry["notes"].extend(v for k, v in report.user_properties if k == "detail")


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        entry = _RESULTS[number]
        states = entry["states"]
        if any(s == "failed" for s in states):
            verdict = "FAIL"
        elif states and all(s == "skipped" for s in states):
            verdict = "SKIP"
        else:
            verdict = "PASS"
        line = f"criterion {number}: {verdict}  {entry['title']}"
        if entry["notes"]:
            line += "  [" + "; ".join(entry["notes"]) + "]"
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
