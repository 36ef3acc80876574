import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ergolab.averages import fixed_projection
from ergolab.observables import (CharSum, FrequencyOverflow, PointVector, character, constant, inner_product,
                                 random_charsum)
from ergolab.systems import (GOLDEN, SQRT2, AnzaiSkew, CatMap, CyclicShift, FinitePermutation, TorusRotation,
                             koopman, parse_system, product, random_observable, verify_system)

CATALOG_IDS = ["zshift:7", "rot1:golden", "rot2:golden", "anzai:golden", "catmap", "perm:1,2,0,4,3",
               "prod(rot1:golden,rot1:sqrt2)", "prod(zshift:3,zshift:4)", "catmap:1,1,1,2"]


@pytest.fixture(params=CATALOG_IDS)
def system(request):
    return parse_system(request.param)


def _diff(a, b):
    d = a - b
    return abs(inner_product(d, d)) ** 0.5


def test_isometry_and_inverse(system):
    assert verify_system(system, samples=6).passed


@given(m=st.integers(-12, 12), n=st.integers(-12, 12), seed=st.integers(0, 10**6))
def test_group_law_exact(m, n, seed):
    rng = np.random.default_rng(seed)
    for sys in (AnzaiSkew(), CatMap(), TorusRotation((GOLDEN, SQRT2)), CyclicShift(9)):
        f = random_observable(sys, rng)
        assert koopman(sys, koopman(sys, f, m), n) == koopman(sys, f, m + n) or \
            _diff(koopman(sys, koopman(sys, f, m), n), koopman(sys, f, m + n)) < 1e-12


def test_multiplicativity_and_constants(system, rng):
    f, g = random_observable(system, rng), random_observable(system, rng)
    for n in (1, 3, -2):
        assert _diff(koopman(system, f * g, n), koopman(system, f, n) * koopman(system, g, n)) < 1e-12
        one = constant(1.0, system.dim) if system.kind == "torus" else PointVector(np.ones(system.space.size),
                                                                                  system.space)
        assert _diff(koopman(system, one, n), one) < 1e-15


def _anzai_step(p, alpha):
    x, y = p[:, 0], p[:, 1]
    return np.stack([(x + alpha) % 1.0, (y + x) % 1.0], axis=1)


def test_anzai_closed_form_matches_composition(rng):
    sys = AnzaiSkew()
    f = random_charsum(rng, 2, 5, 3)
    pts = rng.random((20, 2))
    cur = pts.copy()
    for n in range(1, 65):
        cur = _anzai_step(cur, GOLDEN)
        assert np.allclose(koopman(sys, f, n).evaluate(pts), f.evaluate(cur), atol=1e-9)


def test_catmap_acts_by_the_transpose_on_frequencies(rng):
    M = np.array([[2, 1], [1, 1]])
    f = random_charsum(rng, 2, 4, 3)
    pts = rng.random((10, 2))
    assert np.allclose(koopman(CatMap(), f, 1).evaluate(pts), f.evaluate((pts @ M.T) % 1.0), atol=1e-12)


def test_catmap_frequency_overflow_is_reported():
    with pytest.raises(FrequencyOverflow):
        koopman(CatMap(), character((1, 0)), 200)


def test_only_constants_are_fixed_on_ergodic_systems():
    rot, cat = TorusRotation((GOLDEN,)), CatMap()
    f = character((1,)) + constant(2.0, 1)
    assert fixed_projection(rot, f) == constant(2.0, 1)
    assert all(not cat.is_fixed(v) for v in [(1, 0), (0, 1), (1, -1), (3, 5)])
    assert cat.ergodic == "yes" and AnzaiSkew().ergodic == "yes"


def test_returns_agrees_with_orbit_scan():
    cat = CatMap()
    v = (1, 2)
    cur, orbit = v, {}
    for m in range(1, 31):
        cur, _ = cat.image(cur, 1)
        orbit[cur] = m
    for w, m in list(orbit.items())[::5]:
        assert cat.returns(v, w, 30) == [m]
    assert cat.returns(v, (5, 5), 30) == []


def test_permutation_needs_invariant_weights():
    with pytest.raises(ValueError):
        FinitePermutation((1, 0, 2), (0.2, 0.3, 0.5))
    p = FinitePermutation((1, 0, 2), (0.25, 0.25, 0.5))
    assert p.period == 2


def test_product_of_finite_systems():
    s = product(CyclicShift(3), CyclicShift(4))
    assert s.space.size == 12 and s.period == 12


@pytest.mark.parametrize("bad", ["zshift", "rot2:golden", "nope:1", "catmap:1,2"])
def test_parse_errors(bad):
    with pytest.raises((ValueError, TypeError)):
        s = parse_system(bad)
        if bad == "rot2:golden":  # the default pair is legitimate
            raise ValueError(s)


def test_parse_rational_rotation_flags_non_ergodic():
    r = parse_system("rot1:1/4")
    assert r.ergodic != "yes"
    assert isinstance(koopman(r, character((1,)), 4), CharSum)
