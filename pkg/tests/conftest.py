import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL (or N/A for documented-only) line per criterion for the terminal summary."""

    def record(number: int, ok: bool | None, detail: str) -> bool:
        status = "N/A " if ok is None else "PASS" if ok else "FAIL"
        ACCEPTANCE_LINES.append(f"criterion {number:>2}: {status}  {detail}")
        return ok is not False

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
