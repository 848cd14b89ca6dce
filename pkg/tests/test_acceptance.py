"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest -s tests/test_acceptance.py` to see the lines inline, or
`nematic-gamma validate` for the same checks with CSV output.
"""
import pytest

from nematic_gamma.acceptance import CRITERIA

SLOW = {6, 10}


def _params():
    for k in sorted(CRITERIA):
        marks = [pytest.mark.slow] if k in SLOW else []
        yield pytest.param(k, id=f"criterion_{k:02d}", marks=marks)


@pytest.mark.parametrize("number", list(_params()))
def test_criterion(number, capsys):
    res = CRITERIA[number]()
    with capsys.disabled():
        print("\n" + res.line())
    assert res.passed, res.line()
