"""Shared pytest hooks: acceptance criteria get one summary line each."""

import pytest

ACCEPTANCE: dict[int, str] = {}


def record_acceptance(number: int, description: str, ok: bool, detail: str) -> str:
    status = "PASS" if ok else "FAIL"
    line = f"criterion {number:>2} {status}  {description}: {detail}"
    ACCEPTANCE[number] = line
    return line


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance(number, description): acceptance criterion test"
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when != "call" or not report.failed:
        return
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, description = marker.args
    if number not in ACCEPTANCE:
        crash = getattr(getattr(report, "longrepr", None), "reprcrash", None)
        message = getattr(crash, "message", "errored")
        record_acceptance(number, description, False, message[:120])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])
