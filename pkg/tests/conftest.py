from collections import defaultdict

import pytest

_CRITERIA = defaultdict(list)


@pytest.fixture
def criterion():
    """Record one check toward a numbered acceptance criterion; returns ``ok``."""

    def record(number: int, label: str, ok: bool) -> bool:
        _CRITERIA[number].append((label, bool(ok)))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        checks = _CRITERIA[number]
        failed = [label for label, ok in checks if not ok]
        status = "FAIL" if failed else "PASS"
        detail = "; ".join(failed) if failed else f"{len(checks)} checks"
        terminalreporter.write_line(f"criterion {number}: {status} ({detail})")
