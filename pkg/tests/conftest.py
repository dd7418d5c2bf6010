import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

# criterion name -> (verdict, detail), filled as acceptance tests report
_criteria: dict[str, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    report = outcome.get_result()
    name = marker.args[0]
    if report.skipped:
        reason = report.longrepr[2] if isinstance(report.longrepr, tuple) else ""
        _criteria[name] = ("SKIP", reason)
    elif report.failed:
        lines = report.longreprtext.strip().splitlines()
        _criteria[name] = ("FAIL", lines[-1] if lines else "")
    elif report.when == "call":
        _criteria[name] = ("PASS", f"{report.duration:.2f}s")


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name, (verdict, detail) in _criteria.items():
        terminalreporter.write_line(f"{verdict:4}  {name}  {detail}".rstrip())
