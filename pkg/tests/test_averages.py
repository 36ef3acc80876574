import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ergolab import config
from ergolab.averages import (NonnegativityError, SupportExplosion, cesaro, fixed_projection, liminf_proxy,
                              multi_average, recurrence_quantity, running_inf)
from ergolab.observables import (CharSum, PointVector, character, constant, fejer, indicator, inner_product,
                                 integral, norm, random_charsum)
from ergolab.recurrence import recurrence_oracle
from ergolab.systems import (GOLDEN, AnzaiSkew, CatMap, CyclicShift, TorusRotation, koopman, parse_system,
                             random_observable)

SYSTEMS = ["zshift:9", "rot1:golden", "rot2:golden", "anzai:golden", "catmap", "prod(zshift:2,zshift:3)"]


def _direct(sys, fs, N):
    """Brute-force (1/N) sum_n prod_j T^{jn} f_j."""
    acc = None
    for n in range(1, N + 1):
        term = None
        for j, f in enumerate(fs, start=1):
            t = koopman(sys, f, j * n)
            term = t if term is None else term * t
        acc = term if acc is None else acc + term
    return acc


def _dist(a, b):
    d = a - b
    return math.sqrt(abs(inner_product(d, d)))


@pytest.mark.parametrize("spec", SYSTEMS)
def test_multi_average_matches_direct_sum(spec, rng):
    sys = parse_system(spec)
    fs = [random_observable(sys, rng) for _ in range(2)]
    tr = multi_average(sys, fs, [5, 12])
    assert _dist(tr.values[-1], scale_obs(_direct(sys, fs, 12), 1 / 12)) < 1e-12
    assert tr.norms[-1] == pytest.approx(norm(tr.values[-1]).value, abs=1e-12)


def scale_obs(f, c):
    return f * (constant(c, f.dim) if isinstance(f, CharSum) else PointVector(np.full(f.space.size, c), f.space))


@given(st.integers(0, 10**6))
def test_multilinearity(seed):
    rng = np.random.default_rng(seed)
    sys = AnzaiSkew()
    f, g, h = (random_charsum(rng, 2, 3, 2) for _ in range(3))
    a = complex(rng.normal(), rng.normal())
    lhs = multi_average(sys, [f + scale_obs(g, a), h], [16]).values[-1]
    rhs = multi_average(sys, [f, h], [16]).values[-1] + scale_obs(multi_average(sys, [g, h], [16]).values[-1], a)
    assert _dist(lhs, rhs) < 1e-12


def test_telescoping_bound(rng):
    for sys in (TorusRotation((GOLDEN,)), CyclicShift(17), CatMap()):
        g = random_observable(sys, rng)
        f = g - koopman(sys, g, 1)
        # cat-map frequencies leave the 64-bit range after about 40 steps
        tr = cesaro(sys, f, [1, 7, 30 if sys.kind == "torus" and sys.dim == 2 else 64])
        for N, v in zip(tr.schedule, tr.norms):
            assert v <= 2 * norm(g).value / N + 1e-12


@pytest.mark.parametrize("spec", SYSTEMS)
def test_cesaro_preserves_integral(spec, rng):
    sys = parse_system(spec)
    f = random_observable(sys, rng)
    for avg in cesaro(sys, f, [3, 10]).values:
        assert integral(avg) == pytest.approx(integral(f), abs=1e-12)


def test_cesaro_converges_to_fixed_projection():
    rot = parse_system("rot1:1/4")
    f = character((1,)) + character((4,)) + constant(0.5, 1)
    P = fixed_projection(rot, f)
    assert P == character((4,)) + constant(0.5, 1)
    assert _dist(cesaro(rot, f, [400]).values[-1], P) < 1e-12


def test_recurrence_z6_example():
    z = CyclicShift(6)
    A = indicator([0, 3], z.space)
    tr = recurrence_quantity(z, A, 2, [3, 6])
    assert tr.scalars[0] == pytest.approx(float(recurrence_oracle(z, [0, 3], 2, 3)), abs=1e-15)
    assert tr.scalars[1] == pytest.approx(float(Fraction(1, 9)), abs=1e-15)


def test_constant_recurrence_is_one():
    for sys in (TorusRotation((GOLDEN,)), CyclicShift(5)):
        one = constant(1.0, 1) if sys.kind == "torus" else PointVector(np.ones(5), sys.space)
        assert all(v == pytest.approx(1.0) for v in recurrence_quantity(sys, one, 3, [4, 32], nonneg=True).scalars)


def test_fejer_recurrence_positive_floor():
    tr = recurrence_quantity(TorusRotation((GOLDEN,)), fejer(2), 3, [1024, 4096], nonneg=True)
    assert min(tr.scalars) > 0.01 and tr.meta["liminf_proxy"] > 0.01


def test_recurrence_requires_nonnegativity():
    z = CyclicShift(4)
    with pytest.raises(NonnegativityError):
        recurrence_quantity(z, PointVector([1, -1, 0, 0], z.space), 2, [4])
    with pytest.raises(NonnegativityError):
        recurrence_quantity(TorusRotation((GOLDEN,)), fejer(1), 2, [8])


def test_running_inf_and_proxy():
    assert running_inf([3, 1, 2, 0.5]) == [3, 1, 1, 0.5]
    assert liminf_proxy([5, 4, 1, 2]) == 1


def test_support_cap_reports_explosion():
    f = random_charsum(np.random.default_rng(0), 2, 6, 3)
    with config.override(support_cap=10):
        with pytest.raises(SupportExplosion):
            multi_average(CatMap(), [f, f, f], [64])


def test_thread_count_does_not_change_bits(rng):
    sys = AnzaiSkew()
    fs = [random_charsum(rng, 2, 3, 2) for _ in range(2)]
    with config.override(threads=1):
        a = multi_average(sys, fs, [300, 1000], output="norm").values
    with config.override(threads=8):
        b = multi_average(sys, fs, [300, 1000], output="norm").values
    assert a == b


def test_schedule_validation():
    with pytest.raises(ValueError, match="schedule"):
        cesaro(CyclicShift(3), indicator([0], CyclicShift(3).space), [4, 2])
