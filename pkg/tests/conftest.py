import math
import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from annealed_grg import kernels, meanfield, measures, weights  # noqa: E402

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE_RESULTS: dict = {}


def rank2_model(mu, W=None, theta=0.0, c=None, h=0.0, g=measures.IDENTITY):
    """Rank-2 model with c large enough for every theta used in a test."""
    W = weights.Deterministic(1.0) if W is None else W
    c = max(2.0, 4.0 * abs(theta)) if c is None else c
    return meanfield.ModelSpec(mu, g, kernels.Rank2Kernel(c, theta, g), W, h)


def ising_model(theta, W=None, h=0.0, c=None):
    c = math.sqrt(1.0 + theta * theta) if c is None else c
    return rank2_model(measures.ising(), W, theta, c, h)


@pytest.fixture(scope="session")
def step_measure():
    return measures.step()


_SESSION_START = [0.0]


def pytest_sessionstart(session):
    _SESSION_START[0] = time.perf_counter()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    elapsed = time.perf_counter() - _SESSION_START[0]
    terminalreporter.write_line(f"session runtime {elapsed:.1f}s (full-suite budget 300s)")
