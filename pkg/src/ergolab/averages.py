"""Cesàro and multiple ergodic averages at finite N.

Every average here has the shape ``(1/N) sum_{n=1}^N prod_j T^{m_j n} f_j``
for integer multipliers ``m_j``. Three evaluation paths share that form:

* torus systems where every frequency in play is fixed by ``T`` (rotations,
  the first Anzai coordinate): the product is ``sum C e(n q.alpha) e_F`` and
  the sum over ``n`` is a closed-form geometric sum;
* other torus systems: the product is expanded for each ``n`` and the
  coefficients are accumulated with exactly rounded block sums;
* finite systems: value arrays, summed in fixed blocks.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from . import config, phase
from .observables import CharSum, Observable, PointVector, inner_product, mul_terms
from .reduction import ArrayAccumulator, block_plan, fsum_array, fsum_complex, run_blocks
from .systems import FiniteSystem, System, TorusSystem, check_on
from .traces import AverageTrace, validate_schedule


class SupportExplosion(RuntimeError):
    """The expanded average has more terms than the configured cap."""

    def __init__(self, n: int, size: int, cap: int):
        super().__init__(f"support of the average reached {size} terms at N = {n} (cap {cap})")
        self.n = n
        self.size = size


def default_schedule(sys: System) -> list[int]:
    """Powers of two from 2^8 to 2^14 on tori; up to one full period on finite systems."""
    if sys.kind == "torus":
        return [2**j for j in range(8, 15)]
    period = sys.period
    out = [2**j for j in range(0, 15) if 2**j < period]
    return out + [period]


# --------------------------------------------------------------------------
# engines


def _all_fixed(sys: TorusSystem, term_maps) -> bool:
    return all(sys.is_fixed(v) for t in term_maps for v in t)


def fixed_groups(sys: TorusSystem, term_maps, mults) -> dict:
    """``{(F, q): C}`` with ``prod_j T^{m_j n} f_j = sum C e(n q.alpha) e_F`` for fixed frequencies."""
    zero_f = (0,) * sys.dim
    zero_q = (0,) * len(sys.alphas)
    states = {(zero_f, zero_q): 1 + 0j}
    for t, m in zip(term_maps, mults):
        nxt: dict = {}
        for (F, Q), C in states.items():
            for v, c in t.items():
                q = sys.lin_phase(v)
                key = (tuple(a + b for a, b in zip(F, v)), tuple(a + m * b for a, b in zip(Q, q)))
                nxt[key] = nxt.get(key, 0j) + C * c
        states = nxt
    return states


def _closed_form_sums(sys: TorusSystem, groups: dict, schedule) -> list[dict]:
    al = sys.alphas
    by_f: dict = {}
    for (F, Q), C in groups.items():
        by_f.setdefault(F, []).append((Q, C))
    out = []
    cache: dict = {}
    for N in schedule:
        coeffs = {}
        for F, items in by_f.items():
            parts = []
            for Q, C in items:
                key = (Q, N)
                if key not in cache:
                    cache[key] = phase.geometric_sum(Q, al, N)
                parts.append(C * cache[key])
            s = fsum_complex(parts)
            if s != 0:
                coeffs[F] = s
        out.append(coeffs)
    return out


def _orbit_of(sys: TorusSystem, terms, m: int, count: int):
    if m == 0:
        t = dict(terms)
        return (t for _ in range(count))
    return sys.orbit(terms, count, step=m)


def _expanded_sums(sys: TorusSystem, term_maps, mults, schedule) -> list[dict]:
    cap = config.current().support_cap
    sched = list(schedule)
    blocks = block_plan(sched)
    last = sched[-1]
    orbits = [_orbit_of(sys, t, m, last) for t, m in zip(term_maps, mults)]
    partials: dict = {}
    out = []
    bi = 0
    lo, hi = blocks[0]
    pending: dict = {}
    si = 0
    for n, images in enumerate(zip(*orbits), start=1):
        prod = images[0]
        for t in images[1:]:
            prod = mul_terms(prod, t, eps=0.0)
        for k, c in prod.items():
            pending.setdefault(k, []).append(c)
        if n == hi - 1:
            for k, vals in pending.items():
                partials.setdefault(k, []).append(fsum_complex(vals))
            pending = {}
            if len(partials) > cap:
                raise SupportExplosion(n, len(partials), cap)
            bi += 1
            if bi < len(blocks):
                lo, hi = blocks[bi]
        if n == sched[si]:
            coeffs = {}
            for k, parts in partials.items():
                s = parts[0] if len(parts) == 1 else fsum_complex(parts)
                if s != 0:
                    coeffs[k] = s
            out.append(coeffs)
            si += 1
    return out


def _torus_sums(sys: TorusSystem, fs: Sequence[CharSum], mults, schedule) -> list[dict]:
    term_maps = [f._terms for f in fs]
    if _all_fixed(sys, term_maps):
        groups = fixed_groups(sys, term_maps, mults)
        cap = config.current().support_cap
        if len(groups) > cap:
            raise SupportExplosion(schedule[0], len(groups), cap)
        return _closed_form_sums(sys, groups, schedule)
    return _expanded_sums(sys, term_maps, mults, schedule)


def _finite_sums(sys: FiniteSystem, fs: Sequence[PointVector], mults, schedule) -> list[np.ndarray]:
    vals = [f.values for f in fs]
    size = sys.space.size

    def block_sum(lo, hi):
        acc = np.zeros((hi - lo, size), dtype=complex)
        for r, n in enumerate(range(lo, hi)):
            row = np.ones(size, dtype=complex)
            for v, m in zip(vals, mults):
                row = row * (v if m == 0 else sys.koopman_values(v, m * n))
            acc[r] = row
        return acc.sum(axis=0)

    sched = list(schedule)
    blocks = block_plan(sched)
    sums = run_blocks(block_sum, blocks)
    acc = ArrayAccumulator(size)
    out, si = [], 0
    for (lo, hi), s in zip(blocks, sums):
        acc.add(s)
        if hi - 1 == sched[si]:
            out.append(acc.value())
            si += 1
    return out


def _check_inputs(sys: System, fs: Sequence[Observable], mults) -> None:
    if not fs:
        raise ValueError("need at least one observable")
    for f in fs:
        check_on(sys, f)
    if len(mults) != len(fs):
        raise ValueError("one multiplier per observable")


def raw_sums(sys: System, fs: Sequence[Observable], mults: Sequence[int], schedule: Sequence[int]):
    """Un-normalized sums ``sum_{n<=N} prod_j T^{m_j n} f_j`` at each N of the schedule."""
    sched = validate_schedule(schedule)
    _check_inputs(sys, fs, mults)
    if sys.kind == "torus":
        return _torus_sums(sys, fs, list(mults), sched)
    return _finite_sums(sys, fs, list(mults), sched)


def _l2_terms(t: dict) -> float:
    return math.sqrt(math.fsum(abs(c) ** 2 for c in t.values()))


def _summaries(sys: System, sums, sched, output: str, dim: int | None, space):
    values, norms, integrals = [], [], []
    for N, s in zip(sched, sums):
        if sys.kind == "torus":
            avg = {k: c / N for k, c in s.items()}
            norms.append(_l2_terms(avg))
            integrals.append(complex(avg.get((0,) * dim, 0j)))
            if output == "observable":
                values.append(CharSum._raw(avg, dim))
        else:
            avg = s / N
            w = space.w
            norms.append(math.sqrt(max(float(fsum_array(w * np.abs(avg) ** 2)), 0.0)))
            integrals.append(complex(fsum_array(w * avg)))
            if output == "observable":
                values.append(PointVector(avg, space))
    if output == "norm":
        values = list(norms)
    elif output == "integral":
        values = list(integrals)
    return values, norms, integrals


def _space_info(sys, fs):
    if sys.kind == "torus":
        return fs[0].dim, None
    return None, fs[0].space


def multi_average(sys: System, fs: Sequence[Observable], schedule: Sequence[int] | None = None,
                  output: str = "observable") -> AverageTrace:
    """``(1/N) sum_{n<=N} T^n f_1 T^{2n} f_2 ... T^{kn} f_k`` along the schedule.

    `output` selects what ``values`` holds: ``"observable"`` (the averages),
    ``"norm"`` (their L2 norms) or ``"integral"``. L2 norms are always in
    ``norms``.
    """
    k = len(fs)
    cap = config.current().max_k
    if not 1 <= k <= cap:
        raise ValueError(f"k must lie in [1, {cap}], got {k}")
    if output not in ("observable", "norm", "integral"):
        raise ValueError(f"unknown output {output!r}")
    sched = validate_schedule(schedule or default_schedule(sys))
    sums = raw_sums(sys, fs, list(range(1, k + 1)), sched)
    dim, space = _space_info(sys, fs)
    values, norms, integrals = _summaries(sys, sums, sched, output, dim, space)
    return AverageTrace(sched, values, norms, meta={"k": k, "integrals": integrals})


# --------------------------------------------------------------------------
# Cesàro averages and the fixed space


def _torus_orbit_period(sys: TorusSystem, v, cap: int = 60) -> int | None:
    cur = tuple(v)
    for p in range(1, cap + 1):
        cur = sys.image(cur, 1)[0]
        if cur == tuple(v):
            return p
    return None


def fixed_projection(sys: System, f: Observable) -> Observable:
    """Orthogonal projection onto ``Fix T``.

    Finite systems: weighted cycle means. Torus systems: a frequency whose orbit
    is finite with period ``p`` and whose ``p``-step phase is trivial contributes
    the orbit mean of its character; every other frequency contributes nothing.
    """
    check_on(sys, f)
    if sys.kind == "finite":
        w = sys.space.w
        out = np.zeros(sys.space.size, dtype=complex)
        for cyc in sys.cycles():
            mass = math.fsum(w[cyc].tolist())
            if mass > 0:
                out[cyc] = fsum_array(w[cyc] * f.values[cyc]) / mass
        return PointVector(out, f.space)
    out: dict = {}
    for v, c in sorted(f._terms.items()):
        p = _torus_orbit_period(sys, v)
        if p is None:
            continue
        _, q = sys.image(v, p)
        if not phase.is_integer_dot(q, sys.alphas):
            continue
        for i in range(p):
            w, qi = sys.image(v, i)
            out[w] = out.get(w, 0j) + c * sys.phase_value(qi) / p
    out = {k: c for k, c in out.items() if c != 0}
    return CharSum._raw(out, f.dim)


def cesaro(sys: System, f: Observable, schedule: Sequence[int] | None = None) -> AverageTrace:
    """``(1/N) sum_{n<=N} T^n f``; ``meta["fixed_distance"]`` holds the L2 distance to ``P_Fix f``."""
    tr = multi_average(sys, [f], schedule, output="observable")
    pf = fixed_projection(sys, f)
    dist = []
    for avg in tr.values:
        d = avg - pf
        dist.append(math.sqrt(max(inner_product(d, d).real, 0.0)))
    tr.meta["fixed_distance"] = dist
    tr.meta["fixed_part"] = pf
    return tr


# --------------------------------------------------------------------------
# recurrence


class NonnegativityError(ValueError):
    pass


def running_inf(values: Sequence[float]) -> list[float]:
    out, cur = [], math.inf
    for v in values:
        cur = min(cur, v)
        out.append(cur)
    return out


def liminf_proxy(values: Sequence[float]) -> float:
    """Minimum over the tail half of the schedule (a finite-N proxy, not the liminf)."""
    tail = list(values)[len(values) // 2:]
    return min(tail)


def recurrence_quantity(sys: System, f: Observable, k: int, schedule: Sequence[int] | None = None,
                        nonneg: bool = False) -> AverageTrace:
    """``(1/N) sum_{n<=N} int f T^n f T^{2n} f ... T^{kn} f``.

    Nonnegativity is checked for point vectors; for trigonometric polynomials the
    caller attests it with ``nonneg=True`` (Fejér kernels qualify).
    """
    check_on(sys, f)
    cap = config.current().max_k
    if not 1 <= k <= cap:
        raise ValueError(f"k must lie in [1, {cap}], got {k}")
    if isinstance(f, PointVector):
        mask = f.space.w > 0
        if not (f.is_real() and np.all(f.values.real[mask] >= 0)):
            raise NonnegativityError("f must be real and nonnegative")
    elif not nonneg:
        raise NonnegativityError("nonnegativity of a trigonometric polynomial must be attested (nonneg=True)")
    elif not f.is_real(1e-12):
        raise NonnegativityError("f must be real")
    sched = validate_schedule(schedule or default_schedule(sys))
    sums = raw_sums(sys, [f] * (k + 1), list(range(0, k + 1)), sched)
    dim, space = _space_info(sys, [f])
    _, _, integrals = _summaries(sys, sums, sched, "integral", dim, space)
    vals = [z.real for z in integrals]
    imag = max(abs(z.imag) for z in integrals)
    meta = {
        "k": k,
        "running_inf": running_inf(vals),
        "liminf_proxy": liminf_proxy(vals),
        "positivity_margin": min(vals),
        "imag_residue": imag,
        "note": "finite schedule: a lower-bound proxy for early N, not the liminf",
    }
    return AverageTrace(sched, vals, None, meta)


def self_correlation_terms(sys: System, f: Observable, count: int) -> list[complex]:
    """``<T^n f, f>`` for ``n = 1..count``."""
    check_on(sys, f)
    out = []
    if sys.kind == "torus":
        fc = f._terms
        for t in sys.orbit(fc, count):
            out.append(_inner_raw(t, fc))
    else:
        for n in range(1, count + 1):
            out.append(inner_product(PointVector(sys.koopman_values(f.values, n), f.space), f))
    return out


def _inner_raw(a: dict, b: dict) -> complex:
    vals = [c * b[k].conjugate() for k, c in a.items() if k in b]
    return fsum_complex(vals)
