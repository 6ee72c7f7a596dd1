import pytest

from outerbilliards.geometry import Region


@pytest.fixture(scope="session")
def tail_charts():
    """Corrected semi-disc charts of regions I-IV with their ODE tails."""
    from outerbilliards.adiabatic import solve_phi_psi_odes
    return {r: solve_phi_psi_odes(r) for r in (Region.I, Region.II, Region.III, Region.IV)}


@pytest.fixture(scope="session")
def island():
    """Fixed points, fitted models and twist results for n = 40, 80, 160."""
    from outerbilliards.acceptance import _nf
    return {n: _nf(n) for n in (40, 80, 160)}


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])
