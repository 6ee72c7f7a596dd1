"""One line per acceptance criterion, with the stated tolerances and time limits.

The lines are printed live with ``pytest -s`` and collected into an
"acceptance criteria" block at the end of the terminal report.
"""
import pytest

from outerbilliards import acceptance

NAMES = list(acceptance.CRITERIA)
LINES = {}


@pytest.mark.parametrize("name", NAMES)
def test_criterion(name):
    res = acceptance.run(name)
    print(res.line())
    LINES[res.number] = res.line()
    assert res.passed, res.line()


def test_all_criteria_registered():
    assert len(NAMES) == 13
    assert set(acceptance.LIMITS) == set(NAMES)
