from __future__ import annotations

import re

_CRITERIA: dict[int, tuple[str, str, str]] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    m = re.search(r"test_criterion_(\d+)_(\w+)", report.nodeid)
    if not m:
        return
    n = int(m.group(1))
    detail = dict(report.user_properties).get("detail", "")
    if report.when == "call" or report.outcome == "failed":
        status = "PASS" if report.outcome == "passed" else "FAIL"
        if n not in _CRITERIA or status == "FAIL":
            _CRITERIA[n] = (status, m.group(2).replace("_", " "), detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        status, name, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d} {status}: {name}" + (f" ({detail})" if detail else ""))
