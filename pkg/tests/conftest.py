"""Per-criterion PASS/FAIL summary for tests marked ``criterion(n)``."""
import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

_outcomes: dict = {}
_titles: dict = {}


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark:
            _titles.setdefault(mark.args[0], mark.kwargs.get("title", ""))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _outcomes.setdefault(mark.args[0], []).append((item.name, report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_outcomes):
        results = _outcomes[n]
        states = {o for _, o in results}
        status = "FAIL" if "failed" in states else "SKIP" if states == {"skipped"} else "PASS"
        tr.write_line(f"criterion {n:>2}: {status}  {_titles.get(n, '')}")
        if status != "PASS":
            for name, o in results:
                tr.write_line(f"              {o.upper():7s} {name}")
