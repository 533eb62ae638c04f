import pytest

_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    number = getattr(report, "acceptance", None)
    if number is None:
        return
    status = _ACCEPTANCE.setdefault(number, {"desc": report.acceptance_desc, "outcome": "passed"})
    if report.failed:
        status["outcome"] = "failed"
    elif report.skipped and status["outcome"] == "passed":
        status["outcome"] = "skipped"


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is not None:
        rep.acceptance = marker.args[0]
        rep.acceptance_desc = marker.args[1]


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        st = _ACCEPTANCE[number]
        label = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[st["outcome"]]
        terminalreporter.write_line(f"[{label}] criterion {number}: {st['desc']}")
