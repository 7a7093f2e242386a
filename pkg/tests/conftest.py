import pytest

from cmvlax import sampling

_CRITERIA = []


@pytest.fixture
def gen():
    return sampling.rng(20061015)


@pytest.fixture
def criterion():
    """Record a one-line verdict for an acceptance criterion."""

    def record(label, ok, detail=""):
        _CRITERIA.append((label, bool(ok), detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in _CRITERIA:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}  {detail}")
