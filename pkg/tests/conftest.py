import pytest

ACCEPTANCE = []


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion, then assert."""

    def report(number, title, ok, detail):
        ACCEPTANCE.append((number, f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"))
        assert ok, f"criterion {number} failed: {detail}"

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
