"""The ten acceptance criteria at their stated tolerances, one PASS/FAIL line each."""

import pytest

from floquet_lab.acceptance import CRITERIA, TOTAL_BUDGET, _run

_RESULTS = {}


@pytest.mark.slow
@pytest.mark.parametrize("number,name,budget,fn", CRITERIA, ids=[f"c{c[0]:02d}" for c in CRITERIA])
def test_criterion(number, name, budget, fn, capsys):
    res = _run(number, name, budget, fn)
    _RESULTS[number] = res
    with capsys.disabled():
        print("\n" + res.line(), flush=True)
    assert res.passed, res.detail


@pytest.mark.slow
def test_total_budget():
    if len(_RESULTS) < len(CRITERIA):
        pytest.skip("needs the full criterion run")
    assert sum(r.seconds for r in _RESULTS.values()) < TOTAL_BUDGET
