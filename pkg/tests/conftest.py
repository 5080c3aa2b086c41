"""Shared pytest configuration: the acceptance criterion reporter."""

from __future__ import annotations

from collections import defaultdict

import pytest

_CRITERIA: dict[int, list[tuple[str, bool, str]]] = defaultdict(list)


class CriterionReporter:
    """Collects per-part outcomes of the numbered acceptance criteria."""

    def __call__(self, number: int, part: str, ok: bool, detail: str = "") -> bool:
        _CRITERIA[number].append((part, bool(ok), detail))
        return bool(ok)


@pytest.fixture(scope="session")
def criterion() -> CriterionReporter:
    """Record ``(number, part, ok, detail)``; the summary prints one line per criterion."""
    return CriterionReporter()


def pytest_terminal_summary(terminalreporter) -> None:
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        parts = _CRITERIA[number]
        ok = all(p[1] for p in parts)
        detail = "; ".join(f"{name}: {'ok' if good else 'FAILED'}{f' ({d})' if d else ''}" for name, good, d in parts)
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
