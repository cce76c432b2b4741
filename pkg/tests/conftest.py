import pytest

# criterion id -> (passed, detail); filled by the acceptance tests
CRITERIA: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    def record(key: str, passed: bool, detail: str = "") -> bool:
        CRITERIA[key] = (bool(passed), detail)
        print(f"\n[{'PASS' if passed else 'FAIL'}] criterion {key}: {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for key in sorted(CRITERIA, key=lambda k: (int("".join(c for c in k if c.isdigit()) or 0), k)):
        passed, detail = CRITERIA[key]
        tr.write_line(f"{'PASS' if passed else 'FAIL'}  {key:<4} {detail}")
