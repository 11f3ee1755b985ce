"""Collects acceptance results so they are listed together at the end of the run."""

ACCEPTANCE_RESULTS: dict = {}


def record(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'} ({detail})"
    ACCEPTANCE_RESULTS[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(ACCEPTANCE_RESULTS[number])
