"""Each acceptance criterion at its stated tolerance; prints one pass/fail line each."""
import pytest

from msle import acceptance

CASES = [pytest.param(k, marks=() if k in acceptance.FAST else pytest.mark.slow, id=f"criterion-{k}")
         for k in sorted(acceptance.CRITERIA)]


@pytest.mark.parametrize("number", CASES)
def test_criterion(number, capsys):
    res = acceptance.run_criterion(number)
    with capsys.disabled():
        print("\n" + res.line())
    assert res.passed, res.detail
