import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

_OUTCOMES = {}
_NOTES = {}


@pytest.fixture
def note(request):
    """Attach a one-line detail to the current test's criterion summary."""
    marker = request.node.get_closest_marker("criterion")

    def add(text):
        if marker is not None:
            _NOTES.setdefault(marker.args[0], []).append(text)

    return add


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n = marker.args[0]
    if report.when == "call" or report.failed or report.skipped:
        ok = report.passed and not hasattr(report, "wasxfail")
        prev = _OUTCOMES.get(n, True)
        _OUTCOMES[n] = prev and ok


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_OUTCOMES):
        terminalreporter.write_line(f"criterion {n}: {'PASS' if _OUTCOMES[n] else 'FAIL'}")
        for text in _NOTES.get(n, []):
            terminalreporter.write_line(f"    {text}")
