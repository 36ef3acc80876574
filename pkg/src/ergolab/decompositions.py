"""Structured/residual splits on catalog systems.

The structured subspaces are closed forms. On every torus catalog system with
``k >= 1`` the Host-Kra space ``Z_k`` and the distal factor ``D_k`` consist of
the functions of a set of coordinates:

=================  ===========  ==============  ===========
system             k = 0 (D)    k = 1           k >= 2
=================  ===========  ==============  ===========
rotation           constants    everything      everything
Anzai skew         constants    x-coordinate    everything
hyperbolic cat     constants    constants       constants
finite system      constants    everything      everything
=================  ===========  ==============  ===========

``Z_0`` is the fixed space, computed exactly. Products take the coordinates
kept by each factor. Every closed form is paired with a seminorm certificate
on the residual so it is checked rather than trusted.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import factors as fct
from .averages import fixed_projection, multi_average, raw_sums, self_correlation_terms
from .observables import CharSum, Observable, character, inner_product, sup_bound
from .phase import is_integer_dot
from .reduction import fsum_array
from .seminorms import ghk_seminorm
from .systems import AnzaiSkew, CatMap, System, TorusProduct, TorusRotation, TorusSystem, check_on, koopman
from .traces import validate_schedule


class UnknownStructure(ValueError):
    """The closed-form structure of this system is not in the catalog."""


@dataclass
class SplitResult:
    structured: Observable
    residual: Observable
    certificates: dict = field(default_factory=dict)

    def reconstruction_error(self, f: Observable) -> float:
        d = self.structured + self.residual - f
        return math.sqrt(max(inner_product(d, d).real, 0.0))

    def overlap(self) -> complex:
        return inner_product(self.structured, self.residual)


# --------------------------------------------------------------------------
# closed-form coordinate sets


def _coords_of(sys: TorusSystem, level: int, distal: bool) -> tuple[int, ...]:
    """Coordinates whose functions make up ``Z_level`` (or ``D_level``), ``level >= 1``."""
    if isinstance(sys, TorusProduct):
        out, off = [], 0
        for p in sys.parts:
            out.extend(off + i for i in _coords_of(p, level, distal))
            off += p.dim
        return tuple(out)
    if isinstance(sys, TorusRotation):
        return tuple(range(sys.dim))
    if isinstance(sys, AnzaiSkew):
        return (0,) if level == 1 else (0, 1)
    if isinstance(sys, CatMap):
        if not sys.hyperbolic:
            raise UnknownStructure(f"{sys.ident} is not hyperbolic; its characteristic factors are not tabulated")
        return ()
    raise UnknownStructure(f"no closed-form structure for {sys.ident}")


def zk_factor(sys: System, k: int) -> fct.FactorSpec:
    """``Z_k`` as a factor (``Z_0`` only when it is a factor of the catalog kind)."""
    if k < 0:
        raise ValueError("k must be >= 0")
    name = f"hostkra:{k}"
    if sys.kind == "finite":
        if k == 0:
            return fct.FactorSpec(sys, "partition", blocks=tuple(tuple(c) for c in sys.cycles()), name=name)
        return fct.FactorSpec(sys, "full", name=name)
    if k == 0:
        if sys.ergodic == "yes":
            return fct.FactorSpec(sys, "trivial", name=name)
        raise UnknownStructure(f"the fixed space of {sys.ident} is not tabulated as a factor")
    return fct.from_coordinate_set(sys, _coords_of(sys, k, False), name=name)


def dk_factor(sys: System, k: int) -> fct.FactorSpec:
    if k < 0:
        raise ValueError("k must be >= 0")
    name = f"distal:{k}"
    if k == 0:
        return fct.FactorSpec(sys, "trivial", name=name)
    if sys.kind == "finite":
        return fct.FactorSpec(sys, "full", name=name)
    return fct.from_coordinate_set(sys, _coords_of(sys, k, True), name=name)


def named_factor(sys: System, kind: str, k: int = 1) -> fct.FactorSpec:
    if kind == "kronecker":
        f = zk_factor(sys, 1)
        return fct.FactorSpec(f.parent, f.variant, f.coords, f.blocks, name="kronecker")
    if kind == "hostkra":
        return zk_factor(sys, k)
    if kind == "distal":
        return dk_factor(sys, k)
    raise UnknownStructure(f"unknown named factor {kind!r}")


def hk_projection(sys: System, f: Observable, k: int) -> Observable:
    """``P_{Z_k} f``."""
    check_on(sys, f)
    if k == 0:
        return fixed_projection(sys, f)
    return fct.project_PY(zk_factor(sys, k), f)


def in_zk(sys: System, v, k: int) -> bool:
    """Does the character ``e_v`` lie in ``Z_k`` (torus systems)?"""
    if k == 0:
        return sys.is_fixed(v) and _trivial_phase(sys, v)
    return zk_factor(sys, k).measurable_freq(v)


def in_dk(sys: System, v, k: int) -> bool:
    return dk_factor(sys, k).measurable_freq(v)


def _trivial_phase(sys: TorusSystem, v) -> bool:
    return is_integer_dot(sys.lin_phase(v), sys.alphas)


# --------------------------------------------------------------------------
# von Neumann


def _distance(f: Observable, g: Observable) -> float:
    d = f - g
    return math.sqrt(max(inner_product(d, d).real, 0.0))


def von_neumann_split(sys: System, f: Observable, schedule: Sequence[int] | None = None) -> SplitResult:
    """``f = P_Fix f + (f - P_Fix f)``; certificates: fixed-point defect and residual Cesàro norms."""
    s = fixed_projection(sys, f)
    r = f - s
    defect = _distance(koopman(sys, s, 1), s)
    # norms only: the averaged observables themselves may leave the 64-bit frequency range
    tr = multi_average(sys, [r], schedule, output="norm")
    return SplitResult(s, r, {
        "fixed_point_defect": defect,
        "schedule": list(tr.schedule),
        "residual_cesaro_norm": list(tr.values),
    })


# --------------------------------------------------------------------------
# Jacobs-de Leeuw-Glicksberg


def kronecker_projection(sys: System, f: Observable) -> Observable:
    """Projection onto the span of eigenfunctions.

    Finite systems are entirely almost periodic. On the torus catalog the
    eigenfunction span is spanned by the characters with a finite orbit under
    the frequency map.
    """
    check_on(sys, f)
    if sys.kind == "finite":
        return f
    if isinstance(sys, CatMap) and not sys.hyperbolic:
        keep = {v: c for v, c in f._terms.items() if _finite_orbit(sys, v)}
        return CharSum._raw(keep, f.dim)
    F = zk_factor(sys, 1)
    return fct.project_PY(F, f)


def _finite_orbit(sys: TorusSystem, v, cap: int = 60) -> bool:
    cur = tuple(v)
    for _ in range(cap):
        cur = sys.image(cur, 1)[0]
        if cur == tuple(v):
            return True
    return False


def wm_score_trace(sys: System, r: Observable, schedule: Sequence[int]) -> dict:
    """``(1/N) sum_{n<=N} |<T^n r, r>|^2`` with per-term zero flag."""
    sched = validate_schedule(schedule)
    terms = self_correlation_terms(sys, r, sched[-1])
    sq = [abs(t) ** 2 for t in terms]
    return {
        "schedule": list(sched),
        "score": [math.fsum(sq[:N]) / N for N in sched],
        "termwise_zero": all(t == 0 for t in terms),
    }


def jdlg_split(sys: System, f: Observable, schedule: Sequence[int] | None = None) -> SplitResult:
    s = kronecker_projection(sys, f)
    r = f - s
    sched = schedule or ([2**j for j in range(6, 11)] if sys.kind == "torus" else [sys.period])
    return SplitResult(s, r, {"weak_mixing": wm_score_trace(sys, r, sched)})


# --------------------------------------------------------------------------
# conditional JdLG classification


@dataclass
class Classification:
    label: str  # "conditionally-AP" | "conditionally-WM" | "mixed/undecided"
    eigen: str
    distance: float | None
    wm_scores: list[float]
    termwise_zero: bool
    detail: str = ""


GAP = 1e-3


def conditional_jdlg_classify(sys: System, F: fct.FactorSpec, f: Observable, N: int = 256) -> Classification:
    if F.parent != sys:
        raise ValueError("factor belongs to a different system")
    rep = fct.cond_eigen_check(F, f)
    sched = sorted({max(1, N // 4), max(1, N // 2), N})
    if rep.decision == "yes":
        ap = fct.cond_ap_check(F, f, N)
        return Classification("conditionally-AP", "yes", ap.distance, [], False, rep.detail)
    wm = fct.cond_wm_score(F, f, sched)
    terms = wm.meta["terms"]
    zero = all(t == 0 for t in terms)
    final = wm.values[-1]
    if rep.decision == "no" and final < GAP:
        return Classification("conditionally-WM", "no", None, list(wm.values), zero, rep.detail)
    return Classification("mixed/undecided", rep.decision, None, list(wm.values), zero, rep.detail)


# --------------------------------------------------------------------------
# Host-Kra


def hostkra_project(sys: System, f: Observable, k: int, schedule: Sequence[int] | None = None,
                    full_cycle: bool = False) -> SplitResult:
    """``f = P_{Z_k} f + r`` with the ``U^{k+1}`` trace of ``r`` as certificate."""
    s = hk_projection(sys, f, k)
    r = f - s
    tr = ghk_seminorm(sys, r, k + 1, schedule, full_cycle=full_cycle)
    tail = list(tr.values)[len(tr.values) // 2:]
    nonincreasing = all(b <= a + 1e-6 for a, b in zip(tail, tail[1:]))
    return SplitResult(s, r, {
        "order": k + 1,
        "schedule": list(tr.schedule),
        "residual_seminorm": list(tr.values),
        "residual_power": list(tr.powers),
        "tail_nonincreasing": nonincreasing,
    })


def default_slack(N: int) -> float:
    return 5.0 * N ** -0.25 + 1e-6


def _diff_norm(sys: System, a, b, N: int) -> float:
    if sys.kind == "torus":
        keys = set(a) | set(b)
        return math.sqrt(math.fsum(abs(a.get(k, 0j) - b.get(k, 0j)) ** 2 for k in keys)) / N
    d = (a - b) / N
    return math.sqrt(max(float(fsum_array(sys.space.w * np.abs(d) ** 2)), 0.0))


def verify_characteristic(sys: System, fs: Sequence[Observable], schedule: Sequence[int] | None = None,
                          slack=None, full_cycle: bool = False) -> dict:
    """Replace every ``f_j`` by ``P_{Z_{k-1}} f_j`` and bound the change of the k-term average.

    Checks ``||A_N(f) - A_N(P f)||_2 <= sum_j j ||f_j - P f_j||_{U^k, N} + slack(N)``.
    The bound presumes ``||f_j||_inf <= 1``; the sup bounds are reported.
    """
    k = len(fs)
    slack = slack or default_slack
    if full_cycle:
        sched = (sys.period,)
    else:
        sched = validate_schedule(schedule or ([2**j for j in range(6, 11)] if sys.kind == "torus" else [sys.period]))
    proj = [hk_projection(sys, f, k - 1) for f in fs]
    res = [f - p for f, p in zip(fs, proj)]
    mults = list(range(1, k + 1))
    A = raw_sums(sys, list(fs), mults, sched)
    B = raw_sums(sys, proj, mults, sched)
    semis = [ghk_seminorm(sys, r, k, sched).values for r in res]
    rows = []
    for i, N in enumerate(sched):
        lhs = _diff_norm(sys, A[i], B[i], N)
        rhs = math.fsum((j + 1) * semis[j][i] for j in range(k))
        sl = slack(N) if callable(slack) else float(slack)
        rows.append({"N": N, "lhs": lhs, "rhs": rhs, "slack": sl, "margin": rhs + sl - lhs, "ok": lhs <= rhs + sl})
    return {
        "k": k,
        "rows": rows,
        "passed": all(r["ok"] for r in rows),
        "sup_bounds": [sup_bound(f) for f in fs],
        "slack_policy": "5*N^(-1/4)+1e-6" if slack is default_slack else "custom",
    }


# --------------------------------------------------------------------------
# distal tower


@dataclass
class TowerLevel:
    k: int
    factor: fct.FactorSpec
    compact_over_previous: bool | None
    evidence: str


def distal_tower(sys: System, top: int = 3, sample: int = 4) -> list[TowerLevel]:
    """``D_0 <= D_1 <= ... <= D_top`` with each step checked to be a compact extension.

    The check runs the conditional eigenfunction test over ``D_{k-1}`` on
    characters that are measurable for ``D_k`` (finite systems: compact because
    every extension of a finite space is finite dimensional).
    """
    out = [TowerLevel(0, dk_factor(sys, 0), None, "base")]
    for k in range(1, top + 1):
        F = dk_factor(sys, k)
        prev = out[-1].factor
        if sys.kind == "finite":
            out.append(TowerLevel(k, F, True, "finite-dimensional fibres"))
            continue
        chars = [v for v in _sample_freqs(sys.dim, sample) if F.measurable_freq(v)]
        ok = all(fct.cond_eigen_check(prev, character(v)).decision == "yes" for v in chars)
        out.append(TowerLevel(k, F, ok, f"conditional eigenfunctions over D_{k - 1}: {len(chars)} characters"))
    return out


def _sample_freqs(dim: int, r: int) -> list[tuple[int, ...]]:
    return [v for v in itertools.product(range(-r, r + 1), repeat=dim)]


def _dk_projection(sys: System, f: Observable, k: int) -> Observable:
    return fct.project_PY(dk_factor(sys, k), f)


def verify_zk_in_dk(sys: System, k: int, samples: Sequence) -> dict:
    """``P_{Z_k}``-range inside ``P_{D_k}``-range.

    Torus samples are frequency vectors, compared by support membership.
    Observable samples (finite systems) pass when ``P_{D_k} P_{Z_k} g = P_{Z_k} g``.
    """
    rows = []
    for s in samples:
        if isinstance(s, Observable):
            pz = hk_projection(sys, s, k)
            err = _distance(_dk_projection(sys, pz, k), pz)
            rows.append({"sample": "observable", "error": err, "ok": err <= 1e-12})
            continue
        v = tuple(int(x) for x in s)
        z = in_zk(sys, v, k)
        d = in_dk(sys, v, k)
        rows.append({"char": list(v), "in_Zk": z, "in_Dk": d, "ok": (not z) or d})
    # Z_0 is the fixed space; it sits in the trivial factor only for ergodic systems
    applicable = k >= 1 or sys.ergodic == "yes"
    return {"system": sys.ident, "k": k, "rows": rows, "applicable": applicable,
            "passed": all(r["ok"] for r in rows) or not applicable}
