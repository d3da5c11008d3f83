"""Acceptance criteria, one test each.

Every test prints a single ``PASS``/``FAIL`` line with the measured and
expected values, and a summary follows the last criterion.  The same
checks back ``driftlab verify``.
"""

import pytest

from driftlab import verify

RESULTS = {}


@pytest.fixture(scope="module", autouse=True)
def summary(request):
    yield
    capman = request.config.pluginmanager.getplugin("capturemanager")
    with capman.global_and_fixture_disabled():
        passed = sum(r.passed for r in RESULTS.values())
        print(f"\nacceptance summary: {passed}/{len(RESULTS)} criteria passed")
        for n in sorted(RESULTS):
            print("  " + RESULTS[n].line())


@pytest.mark.parametrize("number", range(1, len(verify.CRITERIA) + 1),
                         ids=lambda n: verify.CRITERIA_NAMES[verify.CRITERIA[n - 1].__name__][1]
                         .replace(" ", "_"))
def test_criterion(number, capsys):
    (res,) = verify.run([number])
    RESULTS[number] = res
    with capsys.disabled():
        print("\n" + res.line())
    assert res.passed, res.line()
