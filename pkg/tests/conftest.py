import functools
import pathlib
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(pathlib.Path(__file__).parent))

from sapsk.constellation import ConstellationSpec  # noqa: E402
from sapsk.montecarlo import SimPlan, simulate_point  # noqa: E402

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# criterion number -> (passed, detail), filled by test_acceptance
ACCEPTANCE: dict = {}


@functools.lru_cache(maxsize=None)
def sim_curve(family, M, gamma, detector, sigma_phi_sq, grid, max_trials, target_errors, seed=0, stop_below=None):
    """Simulate a curve in ascending SNR order, memoised for the session.

    With ``stop_below`` the sweep ends after the first point whose upper
    confidence bound is below that SEP; later points of a monotone curve
    can only be lower.
    """
    plan = SimPlan(
        ConstellationSpec(family, M, gamma), detector, sigma_phi_sq, grid,
        max_trials=max_trials, target_errors=target_errors, seed=seed,
    )
    points = []
    for i, s in enumerate(grid):
        p = simulate_point(plan, s, i)
        points.append(p)
        if stop_below is not None and p.ci_high < stop_below:
            break
    return tuple(points)


@pytest.fixture
def report():
    def _report(n: int, passed: bool, detail: str):
        ACCEPTANCE[n] = (passed, detail)
        print(f"ACCEPTANCE {n:>2} {'PASS' if passed else 'FAIL'}  {detail}")
        return passed

    return _report


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if passed else 'FAIL'}  {detail}")
