from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ergolab.observables import PointVector, character, fejer, indicator
from ergolab.recurrence import (IntegerSet, ap_count, build_correspondence, correspondence_system_check,
                                correspondence_verify, gvn_harness, intersection_counts, mr_certificate,
                                parse_integer_set, recurrence_oracle, upper_density)
from ergolab.systems import GOLDEN, AnzaiSkew, CyclicShift, TorusRotation


def _brute_aps(C, k):
    s = set(C.elements)
    M = C.horizon
    return sum(1 for a in s for n in range(1, M + 1) if all(a + j * n in s for j in range(1, k + 1)))


sets = st.sets(st.integers(1, 40), min_size=1, max_size=25)


@given(sets, st.integers(1, 3))
def test_ap_count_against_brute_force(elements, k):
    C = IntegerSet.of(elements, 40)
    assert ap_count(C, k) == _brute_aps(C, k)


@given(sets, sets, st.integers(1, 3))
def test_ap_count_monotone_under_supersets(a, b, k):
    C, D = IntegerSet.of(a, 40), IntegerSet.of(a | b, 40)
    assert ap_count(C, k) <= ap_count(D, k)


@given(st.sets(st.integers(1, 16), min_size=1, max_size=12), st.integers(1, 3))
def test_correspondence_biconditional_small(elements, k):
    inst = build_correspondence(IntegerSet.of(elements, 16), 3)
    r = correspondence_verify(inst, k)
    assert r["consistent"] and r["counts_match"]
    assert r["system_to_set"] and r["set_to_system"]


def test_correspondence_reports_the_lost_density_bound():
    inst = build_correspondence(IntegerSet.of([1, 2, 3], 3), 2)
    assert inst.N == 9 and inst.measure == Fraction(1, 3)
    assert "not preserved" in inst.meta["density_bound"]
    assert correspondence_system_check(inst)
    counts = intersection_counts(inst, 2)
    assert counts[0] == 3 and counts[1] == 1 and counts[8] == 1


def test_correspondence_rejects_bad_k():
    inst = build_correspondence(IntegerSet.of([1, 5], 5), 1)
    with pytest.raises(ValueError):
        correspondence_verify(inst, 2)


@pytest.mark.parametrize("spec,expected", [
    ("multiples:3:10", (3, 6, 9)),
    ("squares:20", (1, 4, 9, 16)),
    ("range:2:5", (2, 3, 4, 5)),
    ("1,4,2", (1, 2, 4)),
])
def test_parse_integer_set(spec, expected):
    assert parse_integer_set(spec).elements == expected


def test_parse_random_and_file(tmp_path):
    a = parse_integer_set("random:density=0.3:M=200:seed=7")
    assert a == parse_integer_set("random:density=0.3:M=200:seed=7") and a.horizon == 200
    (tmp_path / "s.txt").write_text("3\n1\n7\n")
    assert parse_integer_set("file:s.txt", base_dir=tmp_path).elements == (1, 3, 7)
    with pytest.raises(ValueError):
        parse_integer_set("what:ever")


def test_upper_density_prefix():
    C = parse_integer_set("multiples:2:100")
    assert upper_density(C, 100) == 0.5


@given(st.integers(3, 14), st.integers(0, 10**6), st.integers(1, 3))
def test_mr_certificate_matches_intersection_oracle(M, seed, k):
    rng = np.random.default_rng(seed)
    pts = sorted(set(int(x) for x in rng.integers(0, M, int(rng.integers(1, M)))))
    z = CyclicShift(M)
    cert = mr_certificate(z, indicator(pts, z.space), k, [M])
    assert cert["values"][0] == pytest.approx(float(recurrence_oracle(z, pts, k, M)), abs=4e-16)


def test_mr_certificate_on_fejer():
    cert = mr_certificate(TorusRotation((GOLDEN,)), fejer(2), 2, [256, 1024, 4096], nonneg=True)
    assert cert["liminf_proxy"] > 0.01 and cert["verdict"] == "positive on schedule"
    with pytest.raises(ValueError):
        mr_certificate(CyclicShift(4), PointVector(np.zeros(4), CyclicShift(4).space), 2)


def test_gvn_harness_inequality(rng):
    anzai = AnzaiSkew()
    fs = [0.5 * character((1, 0)) + 0.5 * character((1, 1)), character((0, 1))]
    rep = gvn_harness(anzai, fs, [64, 256])
    assert rep["passed"] and rep["slack_policy"] == "5*N^(-1/4)+1e-6"
    z = CyclicShift(64)
    v = rng.normal(size=64) + 1j * rng.normal(size=64)
    f = PointVector(v / np.abs(v), z.space)
    assert gvn_harness(z, [f, f, f], full_cycle=True)["passed"]


def test_gvn_requires_sup_bound():
    with pytest.raises(ValueError):
        gvn_harness(AnzaiSkew(), [2.0 * character((1, 0))], [16])
    assert gvn_harness(AnzaiSkew(), [2.0 * character((1, 0))], [16], attested=True)["sup_bounds"] == [2.0]
