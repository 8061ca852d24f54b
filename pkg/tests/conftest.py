"""Shared test fixtures.

The acceptance tests record one outcome line each; the hook below prints
them as a block in the terminal summary so a full run ends with a compact
pass/fail table.
"""

import pytest

_acceptance_lines: list[str] = []


@pytest.fixture
def acceptance():
    """Recorder for a single acceptance-criterion outcome."""

    def record(number: int, ok: bool, detail: str) -> bool:
        _acceptance_lines.append(
            f"criterion {number:2d}: {'PASS' if ok else 'FAIL'} - {detail}"
        )
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_acceptance_lines):
            terminalreporter.write_line(line)
