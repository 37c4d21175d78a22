import pytest

_OUTCOMES = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and not report.passed):
        if report.skipped:
            status = "NOT REPRODUCIBLE"
        else:
            status = "PASS" if report.passed else "FAIL"
        detail = item.user_properties and dict(item.user_properties).get("detail")
        _OUTCOMES[number] = (status, title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_OUTCOMES):
        status, title, detail = _OUTCOMES[number]
        line = f"criterion {number}: {status:<16} {title}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)
