import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ergolab.observables import (CharSum, FiniteSpace, FrequencyOverflow, PointVector, SpaceMismatch, character,
                                 conjugate, constant, fejer, from_json, grid_values, indicator, inner_product,
                                 integral, norm, normalized_weights, prune, random_charsum, sup_bound, to_json)

seeds = st.integers(0, 2**32 - 1)


def _charsum(seed, dim=2, n=4):
    return random_charsum(np.random.default_rng(seed), dim, n, 3)


def _vector(seed, n=7):
    rng = np.random.default_rng(seed)
    sp = FiniteSpace(normalized_weights(rng.integers(1, 5, n)))
    return PointVector(rng.normal(size=n) + 1j * rng.normal(size=n), sp)


@pytest.mark.parametrize("make", [_charsum, _vector])
@given(a=seeds, b=seeds)
def test_inner_product_hermitian_and_cauchy_schwarz(make, a, b):
    f, g = make(a), make(b) if make is _charsum else _vector(b)
    if make is _vector:
        g = PointVector(g.values, f.space)
    assert inner_product(f, g) == pytest.approx(inner_product(g, f).conjugate(), abs=1e-12)
    ff = inner_product(f, f)
    assert ff.imag == 0 and ff.real >= 0
    assert abs(inner_product(f, g)) <= norm(f).value * norm(g).value + 1e-12
    assert integral(f * conjugate(g)) == pytest.approx(inner_product(f, g), abs=1e-12)


@given(a=seeds, b=seeds, c=seeds)
def test_charsum_product_commutative_and_associative(a, b, c):
    f, g, h = _charsum(a), _charsum(b), _charsum(c)
    assert (f * g - g * f).terms == {} or max(abs(x) for x in (f * g - g * f).terms.values()) < 1e-12
    d = (f * g) * h - f * (g * h)
    assert all(abs(x) < 1e-12 for x in d.terms.values())


@given(seeds)
def test_norm_monotone_in_p_on_point_vectors(seed):
    f = _vector(seed)
    ps = [1, 1.5, 2, 3, 4, math.inf]
    vals = [norm(f, p).value for p in ps]
    assert all(a <= b + 1e-12 for a, b in zip(vals, vals[1:]))


@given(seeds, st.sampled_from([1e-3, 0.1, 0.5]))
def test_prune_error_bound(seed, eps):
    f = _charsum(seed, n=6)
    assert prune(f, 0) == f
    p = prune(f, eps)
    assert norm(f - p).value <= eps * math.sqrt(len(f)) + 1e-15


def test_fejer_is_nonnegative_with_unit_mass():
    f = fejer([2, 1], 2, shift=[0.3, 0.8])
    assert integral(f) == pytest.approx(1.0)
    assert grid_values(f, 64).real.min() > -1e-12
    assert sup_bound(fejer(3)) == pytest.approx(4.0)


def test_sup_bound_dominates_grid_maximum():
    f = _charsum(3)
    assert np.abs(grid_values(f, 128)).max() <= sup_bound(f) + 1e-12


def test_grid_l2_matches_coefficient_norm():
    f = _charsum(11)
    assert norm(f, 2).value == pytest.approx(math.sqrt(sum(abs(c) ** 2 for c in f.terms.values())))
    # trig polynomials of degree <= 3 are integrated exactly on a 64-point grid
    assert norm(f, 2, resolution=64).value == pytest.approx(norm(f, 2).value, rel=1e-12)


def test_json_round_trip_both_representations():
    f = _charsum(5)
    assert from_json(to_json(f)) == f
    v = _vector(6)
    back = from_json(to_json(v))
    assert np.array_equal(back.values, v.values) and back.space == v.space


def test_space_mismatch_rejected():
    a = PointVector([1, 2, 3], FiniteSpace.uniform(3))
    b = PointVector([1, 2, 3, 4], FiniteSpace.uniform(4))
    with pytest.raises(SpaceMismatch):
        _ = a + b
    with pytest.raises(SpaceMismatch):
        _ = character((1, 0)) + character((1,))


def test_frequency_overflow_is_reported():
    with pytest.raises(FrequencyOverflow):
        character((2**63, 0))


def test_constant_and_indicator():
    assert integral(constant(2.5, 2)) == 2.5
    sp = FiniteSpace.uniform(6)
    assert integral(indicator([0, 3], sp)) == pytest.approx(1 / 3)


def test_weights_must_be_normalized():
    with pytest.raises(ValueError):
        FiniteSpace((0.5, 0.6))
    assert sum(normalized_weights([1, 1, 2])) == 1.0


def test_charsum_prunes_tiny_coefficients():
    f = CharSum({(0,): 1.0, (1,): 1e-20}, 1)
    assert f.support() == [(0,)]
