import pytest

acceptance_lines = []


@pytest.fixture(scope="session")
def criterion_report():
    """One printed pass/fail line per acceptance criterion, echoed in the
    terminal summary so it survives pytest's output capture."""

    def report(num: int, name: str, ok: bool, detail: str):
        line = f"CRITERION {num:2d} {'PASS' if ok else 'FAIL'} {name}: {detail}"
        acceptance_lines.append(line)
        print(line)

    return report


def pytest_terminal_summary(terminalreporter):
    if acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_lines:
            terminalreporter.write_line(line)
