import pytest

# one line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture
def acceptance_report():
    def report(number: int, name: str, passed: bool, detail: str) -> None:
        line = f"{'PASS' if passed else 'FAIL'} [{number}] {name}: {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)

    return report
