import numpy as np
import pytest
from hypothesis import settings

from finslerlab import build_paper_metric, minkowski_randers

settings.register_profile("repro", derandomize=True, deadline=None, print_blob=True)
settings.load_profile("repro")

ACCEPTANCE: dict[int, str] = {}


@pytest.fixture(scope="session")
def conformal():
    return build_paper_metric(3, 0.5)


@pytest.fixture(scope="session")
def randers():
    return minkowski_randers(3, 0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def acceptance():
    """Record the detail line printed for an acceptance criterion."""

    def record(number: int, detail: str):
        ACCEPTANCE[number] = detail

    return record


def pytest_terminal_summary(terminalreporter):
    outcomes = {}
    for key in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(key, []):
            if rep.when != "call" and key == "passed":
                continue
            name = rep.nodeid.rsplit("::", 1)[-1]
            if "test_acceptance.py" in rep.nodeid and name.startswith("test_criterion_"):
                outcomes[int(name.split("_")[2])] = "PASS" if key == "passed" else "FAIL"
    if not outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(outcomes):
        terminalreporter.write_line(f"criterion {number:2d}: {outcomes[number]}  {ACCEPTANCE.get(number, '')}")
