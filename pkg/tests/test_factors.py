import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ergolab import factors as fct
from ergolab.acceptance import _invariant_partition
from ergolab.observables import (CharSum, PointVector, character, conjugate, inner_product, integral, norm,
                                 random_charsum, sample)
from ergolab.systems import AnzaiSkew, CatMap, CyclicShift, FinitePermutation, TorusRotation, koopman, product


def _cv(rng, n):
    return rng.normal(size=n) + 1j * rng.normal(size=n)


@given(st.integers(0, 10**6))
def test_partition_identities(seed):
    rng = np.random.default_rng(seed)
    sys, blocks = _invariant_partition(rng, int(rng.integers(2, 13)))
    F = fct.partition(sys, blocks)
    f = PointVector(_cv(rng, sys.space.size), sys.space)
    h = PointVector(_cv(rng, sys.space.size), sys.space)
    Ef = fct.cond_expect(F, f)
    assert abs(integral(Ef) - integral(f)) < 1e-14
    assert np.array_equal(fct.cond_expect(F, koopman(sys, f, 1)).values, koopman(F.system, Ef, 1).values)
    g = PointVector(_cv(rng, len(blocks)), F.space)
    assert np.allclose(fct.cond_expect(F, fct.embed(F, g) * f).values, g.values * Ef.values, atol=1e-12)
    P = fct.project_PY(F, f)
    assert np.allclose(fct.project_PY(F, P).values, P.values, atol=1e-14)
    assert abs(inner_product(P, h) - inner_product(f, fct.project_PY(F, h))) < 1e-12
    assert norm(P).value <= norm(f).value + 1e-12


@given(st.integers(0, 10**6))
def test_module_norm_inequality_on_partitions(seed):
    rng = np.random.default_rng(seed)
    sys, blocks = _invariant_partition(rng, int(rng.integers(2, 13)))
    F = fct.partition(sys, blocks)
    f = PointVector(_cv(rng, sys.space.size), sys.space)
    g = PointVector(_cv(rng, sys.space.size), sys.space)
    sup = float(np.max(np.abs(f.values)))
    assert fct.cond_sup_norm(F, f * g) <= sup * fct.cond_sup_norm(F, g) * (1 + 1e-12)


def test_anzai_coordinate_factor_identities(rng):
    anzai = AnzaiSkew()
    X = fct.coordinate(anzai, [0])
    for _ in range(5):
        f, g = random_charsum(rng, 2, 5, 3), random_charsum(rng, 1, 3, 3)
        Ef = fct.cond_expect(X, f)
        assert abs(integral(Ef) - integral(f)) < 1e-12
        assert fct.cond_expect(X, koopman(anzai, f, 1)) == koopman(X.system, Ef, 1)
        d = fct.cond_expect(X, fct.embed(X, g) * f) - g * Ef
        assert all(abs(c) < 1e-12 for c in d.terms.values())


def test_conditional_cauchy_schwarz_on_grid(rng):
    X = fct.coordinate(AnzaiSkew(), [0])
    f, g = random_charsum(rng, 2, 4, 2), random_charsum(rng, 2, 4, 2)
    lhs = fct.l1_on_y(X, fct.cond_inner(X, f, g), resolution=512)
    nf, ng = fct.cond_norm(X, f, 512), fct.cond_norm(X, g, 512)
    rhs = float(np.sum(nf.space.w * nf.values.real * ng.values.real))
    assert lhs <= rhs + 1e-9


def test_positive_functions_stay_positive(rng):
    for _ in range(10):
        sys, blocks = _invariant_partition(rng, 9)
        F = fct.partition(sys, blocks)
        p = PointVector(rng.random(9) + 1e-3, sys.space)
        assert np.all(fct.project_PY(F, p).values.real > 0)


def test_non_invariant_factors_rejected():
    with pytest.raises(fct.InvalidFactor):
        fct.partition(CyclicShift(4), [[0, 1], [2, 3]])
    with pytest.raises(fct.InvalidFactor):
        fct.coordinate(AnzaiSkew(), [1])
    with pytest.raises(fct.InvalidFactor):
        fct.partition(CyclicShift(4), [[0, 2], [1]])
    assert fct.partition(CyclicShift(4), [[0, 2], [1, 3]]).system.period == 2


def test_trivial_factor_is_the_integral(rng):
    f = PointVector(_cv(rng, 5), CyclicShift(5).space)
    Ef = fct.cond_expect(fct.trivial(CyclicShift(5)), f)
    assert Ef.values[0] == pytest.approx(integral(f))


def test_parse_factor(tmp_path):
    z = CyclicShift(6)
    assert fct.parse_factor("partition:0,2,4|1,3,5", z).blocks == ((0, 2, 4), (1, 3, 5))
    (tmp_path / "p.json").write_text('{"blocks": [[0, 3], [1, 4], [2, 5]]}')
    assert len(fct.parse_factor("partition:p.json", z, base_dir=tmp_path).blocks) == 3
    assert fct.parse_factor("coord:0", AnzaiSkew()).coords == (0,)
    assert fct.parse_factor("kronecker", AnzaiSkew()).kept_coords == (0,)
    with pytest.raises(fct.InvalidFactor):
        fct.parse_factor("bogus", z)


def test_eigen_and_ap_decisions_for_characters():
    anzai = AnzaiSkew()
    X = fct.coordinate(anzai, [0])
    rep = fct.cond_eigen_check(X, character((2, 1)))
    assert rep.decision == "yes"
    assert fct.cond_ap_check(X, character((2, 1)), 64).distance == 0
    assert fct.cond_eigen_check(fct.trivial(CatMap()), character((1, 1))).decision == "no"
    rot = TorusRotation((0.6180339887498949,))
    assert fct.cond_eigen_check(fct.trivial(rot), character((3,))).decision == "yes"


def test_wm_score_variants_are_reported_separately():
    F = fct.trivial(CatMap())
    for variant in ("L1", "L2"):
        tr = fct.cond_wm_score(F, character((1, 0)), [8, 16], variant=variant)
        assert tr.values == [0.0, 0.0] and tr.meta["variant"] == variant
    with pytest.raises(ValueError):
        fct.cond_wm_score(F, character((1, 0)), [8], variant="L3")


def test_product_partition_from_cycles():
    s = product(CyclicShift(2), CyclicShift(2))
    F = fct.partition(s, [[0, 3], [1, 2]])
    assert isinstance(F.system, FinitePermutation)
    assert isinstance(fct.cond_expect(fct.coordinate(AnzaiSkew(), [0]), character((1, 0))), CharSum)
    assert sample(character((1,)), 8).space.size == 8
    assert conjugate(character((1,))) == character((-1,))
