"""Collects acceptance lines so the summary shows one verdict per criterion."""

ACCEPTANCE: dict[int, str] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: release-gate round-trip test")


def record_acceptance(number: int, description: str, ok: bool, detail: str) -> None:
    verdict = "PASS" if ok else "FAIL"
    ACCEPTANCE[number] = f"criterion {number:>2} {verdict}  {description}: {detail}"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])
