import time

import pytest

ACCEPTANCE = {}


class Criterion:
    """Records one acceptance line: number, verdict, measured detail, wall time."""

    def __init__(self, number: int, title: str):
        self.number, self.title = number, title
        self.t0 = time.perf_counter()

    def done(self, ok: bool, detail: str, budget_s: float | None = None) -> bool:
        elapsed = time.perf_counter() - self.t0
        within = budget_s is None or elapsed < budget_s
        verdict = "PASS" if ok and within else "FAIL"
        budget = f" (budget {budget_s:g} s)" if budget_s is not None else ""
        line = f"[{verdict}] criterion {self.number:>2} {self.title}: {detail}; {elapsed:.3f} s{budget}"
        ACCEPTANCE[self.number] = line
        print(line)
        return ok and within


@pytest.fixture
def criterion():
    return Criterion


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
