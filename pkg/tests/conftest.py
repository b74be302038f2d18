"""Prints one PASS/FAIL line per acceptance criterion after the run."""

import re

_results = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _results[report.nodeid] = report


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, rep in sorted(_results.items(), key=lambda kv: _number(kv[0])):
        status = "PASS" if rep.passed else "FAIL"
        measured = dict(rep.user_properties).get("measured", "")
        name = nodeid.split("::")[-1]
        terminalreporter.write_line(f"criterion {_number(nodeid):>2} {status}  {name}  {measured}")


def _number(nodeid):
    m = re.search(r"criterion_(\d+)", nodeid)
    return int(m.group(1)) if m else 0
