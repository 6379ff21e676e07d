import os
from pathlib import Path

import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

ROOT = Path(__file__).resolve().parents[1]
STATISTICAL = os.environ.get("BILAYER_STATISTICAL") == "1"

_criteria: dict[int, tuple[bool, str]] = {}


class CriterionReport:
    """Collects sub-checks of one acceptance criterion."""

    def __init__(self, number: int, title: str):
        self.number = number
        self.title = title
        self.failures: list[str] = []
        self.notes: list[str] = []

    def check(self, ok: bool, what: str) -> None:
        (self.notes if ok else self.failures).append(what)

    def finish(self) -> None:
        ok = not self.failures
        detail = "; ".join(self.failures if not ok else self.notes[-3:])
        _criteria[self.number] = (ok, f"{self.title}: {detail}")
        print(f"CRITERION {self.number} {'PASS' if ok else 'FAIL'} {self.title}")
        for line in self.notes + self.failures:
            print(f"  {line}")
        assert ok, f"criterion {self.number} failed: " + "; ".join(self.failures)


@pytest.fixture
def criterion():
    return CriterionReport


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, 12):
        if n in _criteria:
            ok, detail = _criteria[n]
            terminalreporter.write_line(f"CRITERION {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        elif n in (8, 9, 10) and not STATISTICAL:
            terminalreporter.write_line(f"CRITERION {n:2d}: SKIPPED  statistical; set BILAYER_STATISTICAL=1")
        else:
            terminalreporter.write_line(f"CRITERION {n:2d}: NOT RUN")
