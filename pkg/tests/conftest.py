from __future__ import annotations

import pytest

# criterion number -> (title, outcome); filled by the acceptance tests
RESULTS: dict[int, list] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n, title = marker.args
    entry = RESULTS.setdefault(n, [title, "PASS"])
    failed = rep.failed or (rep.when == "call" and rep.skipped)
    if failed:
        entry[1] = "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        title, status = RESULTS[n]
        terminalreporter.write_line(f"criterion {n:>2}: {status}  {title}")
