from __future__ import annotations

import pytest

from streamflow.api import Platform
from streamflow.runtime import Runtime
from streamflow.store import MemoryStore

_acceptance: dict[int, tuple[str, bool]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion check")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    failed = report.failed or (report.when == "call" and report.skipped)
    prev = _acceptance.get(number, (title, True))
    if report.when == "call" or failed:
        _acceptance[number] = (title, prev[1] and not failed)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_acceptance):
        title, ok = _acceptance[number]
        terminalreporter.write_line(f"AC{number} {title}: {'PASS' if ok else 'FAIL'}")


@pytest.fixture
def store():
    return MemoryStore()


@pytest.fixture
def runtime(store):
    rt = Runtime(store, fetch_workers=4).start(4)
    yield rt
    rt.shutdown(timeout=10)


@pytest.fixture
def platform(store, runtime):
    return Platform(store, runtime)
