import numpy as np
import pytest

from walklab.renewal import estimate_U, estimate_V, estimate_V0
from walklab.rng import RandomStream
from walklab.walk import exact_stable, gaussian

GRID = np.arange(0.0, 40.0 + 1e-9, 0.25)


@pytest.fixture(scope="session")
def gauss_tables():
    """Moderate-precision U, V, V0 tables for standard Gaussian steps."""
    m, st = gaussian(), RandomStream(101)
    reps = 1 << 16
    return {
        "U": estimate_U(m, GRID, reps, 100_000, st.child("U")),
        "V": estimate_V(m, GRID, reps, 100_000, st.child("V")),
        "V0": estimate_V0(m, GRID, reps, 100_000, st.child("V0")),
    }


@pytest.fixture(scope="session")
def stable_U():
    return estimate_U(exact_stable(1.5, 0, 1), np.arange(0.0, 10.0 + 1e-9, 0.5), 1 << 15, 100_000,
                      RandomStream(102))


_CRITERIA = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record one acceptance line: ``criterion(k, title, ok, detail)``."""
    lines = request.config.stash.setdefault(_CRITERIA, [])

    def record(k, title, ok, detail=""):
        line = f"CRITERION {k:>2} {'PASS' if ok else 'FAIL'}  {title}" + (f"  [{detail}]" if detail else "")
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_CRITERIA, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
