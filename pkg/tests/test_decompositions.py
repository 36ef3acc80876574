import numpy as np
import pytest

from ergolab import factors as fct
from ergolab.decompositions import (UnknownStructure, conditional_jdlg_classify, distal_tower, dk_factor,
                                    hk_projection, hostkra_project, in_dk, in_zk, jdlg_split, kronecker_projection,
                                    named_factor, verify_characteristic, verify_zk_in_dk, von_neumann_split,
                                    zk_factor)
from ergolab.observables import PointVector, inner_product, character, constant, fejer, random_charsum
from ergolab.seminorms import ghk_seminorm
from ergolab.systems import (GOLDEN, AnzaiSkew, CatMap, CyclicShift, FinitePermutation, TorusRotation,
                             parse_system, product)

SYSTEMS = ["rot1:golden", "rot2:golden", "anzai:golden", "catmap", "zshift:8", "prod(rot1:golden,anzai:golden)",
           "rot1:1/3"]


def _obs(sys, rng):
    if sys.kind == "torus":
        return random_charsum(rng, sys.dim, 5, 3)
    return PointVector(rng.normal(size=sys.space.size) + 1j * rng.normal(size=sys.space.size), sys.space)


@pytest.mark.parametrize("spec", SYSTEMS)
def test_splits_reconstruct_and_are_orthogonal(spec, rng):
    sys = parse_system(spec)
    f = _obs(sys, rng)
    for res in (von_neumann_split(sys, f, [16, 64]), jdlg_split(sys, f, [16, 64])):
        assert res.reconstruction_error(f) < 1e-12
        assert abs(res.overlap()) < 1e-12
    for k in (0, 1, 2):
        s = hk_projection(sys, f, k)
        d = s - hk_projection(sys, s, k)
        assert abs(inner_product(d, d)) < 1e-24
        assert abs(inner_product(s, f - s)) < 1e-12


def test_von_neumann_residual_cesaro_decays():
    res = von_neumann_split(TorusRotation((GOLDEN,)), character((1,)) + constant(2.0, 1), [64, 1024])
    assert res.structured == constant(2.0, 1)
    assert res.certificates["fixed_point_defect"] == 0
    a, b = res.certificates["residual_cesaro_norm"]
    assert b < a < 0.05


def test_jdlg_on_catmap_is_termwise_weak_mixing():
    f = character((1, 2)) + 0.5 * character((0, 0))
    res = jdlg_split(CatMap(), f, [16, 64])
    assert res.structured == 0.5 * character((0, 0))
    assert res.certificates["weak_mixing"]["termwise_zero"]


def test_kronecker_projection_rules():
    assert kronecker_projection(AnzaiSkew(), character((2, 1))) == 0 * character((2, 1))
    assert kronecker_projection(AnzaiSkew(), character((2, 0))) == character((2, 0))
    periodic = CatMap(((0, 1), (-1, 0)))
    assert kronecker_projection(periodic, character((1, 2))) == character((1, 2))


def test_z_and_d_tables():
    anzai = AnzaiSkew()
    assert zk_factor(anzai, 1).kept_coords == (0,)
    assert zk_factor(anzai, 2).kept_coords == (0, 1)
    assert in_zk(anzai, (3, 0), 1) and not in_zk(anzai, (3, 1), 1) and in_zk(anzai, (3, 1), 2)
    cat = CatMap()
    assert zk_factor(cat, 3).variant == "trivial" and not in_dk(cat, (1, 0), 3)
    assert named_factor(anzai, "distal", 2).kept_coords == (0, 1)
    assert dk_factor(CyclicShift(6), 1).variant == "full"
    with pytest.raises((UnknownStructure, ValueError)):
        named_factor(anzai, "nonsense", 1)


@pytest.mark.parametrize("spec", SYSTEMS)
def test_zk_inside_dk(spec, rng):
    sys = parse_system(spec)
    samples = ([tuple(int(x) for x in rng.integers(-3, 4, sys.dim)) for _ in range(20)] if sys.kind == "torus"
               else [_obs(sys, rng) for _ in range(5)])
    for k in range(4):
        assert verify_zk_in_dk(sys, k, samples)["passed"]


def test_hostkra_residual_is_seminorm_null_on_anzai():
    f = character((1, 1)) + character((2, 0))
    res = hostkra_project(AnzaiSkew(), f, 1, [64, 256, 1024])
    assert res.structured == character((2, 0))
    assert res.certificates["residual_seminorm"][-1] < 0.1
    assert res.certificates["tail_nonincreasing"]
    assert hostkra_project(AnzaiSkew(), f, 2, [64]).certificates["residual_seminorm"] == [0.0]


def test_residual_certificate_is_a_real_seminorm():
    f = fejer(1, 2)
    res = hostkra_project(AnzaiSkew(), f, 1, [128])
    direct = ghk_seminorm(AnzaiSkew(), res.residual, 2, [128]).final
    assert res.certificates["residual_seminorm"][-1] == direct


def test_characteristic_factor_bound(rng):
    fs = [random_charsum(rng, 2, 3, 2) for _ in range(2)]
    fs = [f * constant(1.0 / sum(abs(c) for c in f.terms.values()), 2) for f in fs]
    rep = verify_characteristic(AnzaiSkew(), fs, [64, 256])
    assert rep["passed"]
    assert all(b <= 1 + 1e-12 for b in rep["sup_bounds"])


def test_classification_of_characters():
    anzai = AnzaiSkew()
    X = fct.coordinate(anzai, [0])
    c = conditional_jdlg_classify(anzai, X, character((1, 3)))
    assert c.label == "conditionally-AP" and c.distance == 0
    cat = CatMap()
    w = conditional_jdlg_classify(cat, fct.trivial(cat), character((2, 1)))
    assert w.label == "conditionally-WM" and w.termwise_zero
    with pytest.raises(ValueError):
        conditional_jdlg_classify(cat, X, character((1, 0)))


def test_distal_tower_on_anzai():
    levels = distal_tower(AnzaiSkew(), top=2)
    assert [lv.k for lv in levels][:3] == [0, 1, 2]
    assert all(lv.compact_over_previous in (True, None) for lv in levels)


def test_finite_permutation_splits_exactly():
    sys = FinitePermutation((1, 0, 3, 4, 2))
    f = PointVector(np.arange(5.0), sys.space)
    res = von_neumann_split(sys, f)
    assert np.allclose(res.structured.values, [0.5, 0.5, 3.0, 3.0, 3.0])


def test_product_tables_take_union():
    p = product(TorusRotation((GOLDEN,)), AnzaiSkew())
    assert zk_factor(p, 1).kept_coords == (0, 1)
