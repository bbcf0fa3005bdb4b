"""Collects the per-criterion ACCEPTANCE lines and replays them after the
run, so they are visible even though pytest captures test stdout."""

import pytest

_LINES = []


@pytest.fixture
def acceptance():
    def emit(n: int, ok: bool, detail: str) -> bool:
        line = f"ACCEPTANCE {n} {'PASS' if ok else 'FAIL'}: {detail}"
        _LINES.append((n, line))
        print(line, flush=True)
        return bool(ok)

    return emit


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _LINES:
        return
    terminalreporter.section("acceptance summary")
    for _, line in sorted(_LINES):
        terminalreporter.write_line(line)
