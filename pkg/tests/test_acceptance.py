"""All twelve acceptance criteria at their stated tolerances.

Each test records one PASS/FAIL line, printed together at the end of the run.
Criteria 1-11 run single-threaded; criterion 12 reruns them with 8 threads and
compares the report bytes.
"""
import pytest

from conftest import ACCEPTANCE_LINES
from ergolab import config
from ergolab.acceptance import CRITERIA, determinism

_cache: dict = {}


def _outcome(n):
    if n not in _cache:
        with config.override(threads=1):
            _cache[n] = CRITERIA[n]()
    return _cache[n]


def _record(o):
    ACCEPTANCE_LINES[o.number] = o.line()
    print(o.line())


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    o = _outcome(number)
    _record(o)
    assert o.passed, o.details


def test_criterion_12_determinism():
    o = determinism([_outcome(n) for n in sorted(CRITERIA)])
    _record(o)
    assert o.passed
