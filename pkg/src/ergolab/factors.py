"""Structurally specified factors and conditional quantities over them.

A factor is given by an invariant sub-sigma-algebra: the trivial one, the full
one, the algebra of an invariant set of torus coordinates, or the algebra
generated by a partition of a finite space whose blocks the permutation
permutes. For each of these the conditional expectation is exact.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from .observables import (CharSum, FiniteSpace, Observable, PointVector, SpaceMismatch, conj_terms,
                          conjugate, mul_terms, norm, normalized_weights, sample)
from .reduction import fsum_array
from .systems import FinitePermutation, FiniteSystem, System, TorusSystem, check_on
from .traces import AverageTrace, validate_schedule

POINT = FiniteSpace((1.0,), "point")
POINT_SYSTEM = FinitePermutation((0,), (1.0,), label="point")

VARIANTS = ("trivial", "full", "coordinate", "partition")


class InvalidFactor(ValueError):
    pass


class CoordinateFactorSystem(TorusSystem):
    """The system induced on an invariant set of torus coordinates."""

    def __init__(self, parent: TorusSystem, coords: tuple[int, ...]):
        self.parent = parent
        self.coords = coords
        self.dim = len(coords)

    def __eq__(self, other):
        return isinstance(other, CoordinateFactorSystem) and (self.parent, self.coords) == (other.parent, other.coords)

    def __hash__(self):
        return hash((self.parent, self.coords))

    @property
    def ident(self):
        return f"factor({self.parent.ident};coords={','.join(map(str, self.coords))})"

    @property
    def ergodic(self):
        return self.parent.ergodic if self.parent.ergodic == "yes" else "unknown"

    @property
    def alphas(self):
        return self.parent.alphas

    @cached_property
    def freq_matrix(self):
        A = self.parent.freq_matrix
        return A[np.ix_(self.coords, self.coords)]

    def _lift(self, u):
        v = [0] * self.parent.dim
        for i, x in zip(self.coords, u):
            v[i] = x
        return tuple(v)

    def _drop(self, v):
        return tuple(v[i] for i in self.coords)

    def image(self, u, n):
        w, q = self.parent.image(self._lift(u), n)
        return self._drop(w), q

    def is_fixed(self, u):
        return self.parent.is_fixed(self._lift(u))

    def lin_phase(self, u):
        return self.parent.lin_phase(self._lift(u))

    def returns(self, u, w, N):
        return self.parent.returns(self._lift(u), self._lift(w), N)


@dataclass(frozen=True)
class FactorSpec:
    parent: System
    variant: str
    coords: tuple[int, ...] = ()
    blocks: tuple[tuple[int, ...], ...] = ()
    name: str = ""

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise InvalidFactor(f"unknown factor variant {self.variant!r}")
        if self.variant == "coordinate":
            if self.parent.kind != "torus":
                raise InvalidFactor("coordinate factors need a torus system")
            coords = tuple(sorted(set(int(c) for c in self.coords)))
            if not coords or coords[-1] >= self.parent.dim or coords[0] < 0:
                raise InvalidFactor(f"coordinates {self.coords} out of range")
            object.__setattr__(self, "coords", coords)
            _check_invariant_coords(self.parent, coords)
        if self.variant == "partition":
            if self.parent.kind != "finite":
                raise InvalidFactor("partition factors need a finite system")
            blocks = tuple(tuple(sorted(int(x) for x in b)) for b in self.blocks)
            flat = sorted(x for b in blocks for x in b)
            if flat != list(range(self.parent.space.size)) or any(not b for b in blocks):
                raise InvalidFactor("blocks must partition the points")
            object.__setattr__(self, "blocks", blocks)
            _check_invariant_blocks(self.parent, blocks)

    # -- the factor space -------------------------------------------------

    @property
    def ident(self) -> str:
        if self.name:
            return self.name
        if self.variant == "coordinate":
            return "coord:" + ",".join(map(str, self.coords))
        if self.variant == "partition":
            return "partition:" + "|".join(",".join(map(str, b)) for b in self.blocks)
        return self.variant

    @property
    def y_kind(self) -> str:
        if self.variant in ("trivial", "partition"):
            return "finite"
        return self.parent.kind

    @cached_property
    def block_of(self) -> np.ndarray:
        out = np.empty(self.parent.space.size, dtype=np.int64)
        for i, b in enumerate(self.blocks):
            out[list(b)] = i
        return out

    @cached_property
    def block_mass(self) -> np.ndarray:
        w = self.parent.space.w
        return np.array([math.fsum(w[list(b)].tolist()) for b in self.blocks])

    @cached_property
    def space(self) -> FiniteSpace:
        """Finite factor space (trivial, partition, or full over a finite parent)."""
        if self.variant == "trivial":
            return POINT
        if self.variant == "partition":
            return FiniteSpace(normalized_weights(self.block_mass), f"{self.parent.ident}/{self.ident}")
        if self.variant == "full" and self.parent.kind == "finite":
            return self.parent.space
        raise AttributeError("torus factor spaces are tori, not finite spaces")

    @cached_property
    def dim(self) -> int:
        if self.variant == "coordinate":
            return len(self.coords)
        if self.variant == "full" and self.parent.kind == "torus":
            return self.parent.dim
        raise AttributeError("finite factor spaces have no torus dimension")

    @cached_property
    def system(self) -> System:
        """The induced factor system ``(Y, nu, S)``."""
        if self.variant == "trivial":
            return POINT_SYSTEM
        if self.variant == "full":
            return self.parent
        if self.variant == "coordinate":
            return CoordinateFactorSystem(self.parent, self.coords)
        perm = self.parent.index_map(1)
        bp = [int(self.block_of[perm[b[0]]]) for b in self.blocks]
        return FinitePermutation(tuple(bp), self.space.weights, label=self.space.label)

    @cached_property
    def kept_coords(self) -> tuple[int, ...]:
        if self.variant == "trivial":
            return ()
        if self.variant == "full":
            return tuple(range(self.parent.dim))
        return self.coords

    def measurable_freq(self, v) -> bool:
        """Is ``e_v`` measurable w.r.t. this factor (torus parents)?"""
        kept = set(self.kept_coords)
        return all(x == 0 for i, x in enumerate(v) if i not in kept)


def _check_invariant_coords(sys: TorusSystem, coords: tuple[int, ...]) -> None:
    kept = set(coords)
    for i in coords:
        unit = tuple(1 if j == i else 0 for j in range(sys.dim))
        for n in (1, -1):
            w, _ = sys.image(unit, n)
            if any(x != 0 for j, x in enumerate(w) if j not in kept):
                raise InvalidFactor(f"coordinates {coords} are not invariant under {sys.ident}")


def _check_invariant_blocks(sys: FiniteSystem, blocks) -> None:
    perm = sys.index_map(1)
    owner = {x: i for i, b in enumerate(blocks) for x in b}
    for b in blocks:
        if len({owner[int(perm[x])] for x in b}) != 1:
            raise InvalidFactor("the permutation does not map blocks onto blocks")


def trivial(sys: System) -> FactorSpec:
    return FactorSpec(sys, "trivial")


def full(sys: System) -> FactorSpec:
    return FactorSpec(sys, "full")


def coordinate(sys: System, coords: Sequence[int]) -> FactorSpec:
    return FactorSpec(sys, "coordinate", coords=tuple(coords))


def partition(sys: System, blocks) -> FactorSpec:
    return FactorSpec(sys, "partition", blocks=tuple(tuple(b) for b in blocks))


def from_coordinate_set(sys: System, coords: Sequence[int], name: str = "") -> FactorSpec:
    coords = tuple(coords)
    if not coords:
        return FactorSpec(sys, "trivial", name=name)
    if sys.kind == "torus" and len(coords) == sys.dim:
        return FactorSpec(sys, "full", name=name)
    return FactorSpec(sys, "coordinate", coords=coords, name=name)


def parse_factor(spec: str, sys: System, base_dir=None) -> FactorSpec:
    """``trivial``, ``full``, ``coord:0``, ``partition:file.json`` or ``0,1|2,3``, or a named factor."""
    head, _, arg = spec.partition(":")
    if head == "trivial":
        return trivial(sys)
    if head == "full":
        return full(sys)
    if head == "coord":
        return coordinate(sys, [int(x) for x in arg.split(",")])
    if head == "partition":
        if arg.endswith(".json"):
            data = json.loads((Path(base_dir or ".") / arg).read_text())
            blocks = data["blocks"] if isinstance(data, dict) else data
        else:
            blocks = [[int(x) for x in b.split(",")] for b in arg.split("|")]
        return partition(sys, blocks)
    if head in ("kronecker", "hostkra", "distal"):
        from .decompositions import named_factor
        k = int(arg) if arg else 1
        return named_factor(sys, head, k)
    raise InvalidFactor(f"unknown factor {spec!r}")


# --------------------------------------------------------------------------
# conditional expectation


def _check_parent(F: FactorSpec, f: Observable) -> None:
    check_on(F.parent, f)


def cond_expect_terms(F: FactorSpec, terms) -> dict | complex:
    """Raw ``E_Y`` on a coefficient map: a Y-coefficient map, or a scalar for the trivial factor."""
    if F.variant == "trivial":
        return complex(terms.get((0,) * F.parent.dim, 0j))
    if F.variant == "full":
        return dict(terms)
    kept = F.coords
    out = {}
    for v, c in terms.items():
        if F.measurable_freq(v):
            out[tuple(v[i] for i in kept)] = c
    return out


def _block_means(F: FactorSpec, values: np.ndarray) -> np.ndarray:
    w = F.parent.space.w
    out = np.zeros(len(F.blocks), dtype=complex)
    for i, b in enumerate(F.blocks):
        idx = list(b)
        mass = F.block_mass[i]
        out[i] = fsum_array(w[idx] * values[idx]) / mass if mass > 0 else 0j
    return out


def cond_expect(F: FactorSpec, f: Observable) -> Observable:
    """``E_Y f`` as an observable on the factor space."""
    _check_parent(F, f)
    if F.variant == "full":
        return f
    if isinstance(f, CharSum):
        r = cond_expect_terms(F, f._terms)
        if F.variant == "trivial":
            return PointVector([r], POINT)
        return CharSum._raw(r, F.dim)
    if F.variant == "trivial":
        return PointVector([fsum_array(F.parent.space.w * f.values)], POINT)
    return PointVector(_block_means(F, f.values), F.space)


def embed(F: FactorSpec, g: Observable) -> Observable:
    """The Markov embedding ``J``: view a function on ``Y`` as one on ``X``."""
    if F.variant == "full":
        check_on(F.parent, g)
        return g
    if F.variant == "trivial":
        if not isinstance(g, PointVector) or g.space != POINT:
            raise SpaceMismatch("trivial-factor observables live on the one-point space")
        c = complex(g.values[0])
        if F.parent.kind == "torus":
            return CharSum({(0,) * F.parent.dim: c}, F.parent.dim)
        return PointVector(np.full(F.parent.space.size, c), F.parent.space)
    if F.variant == "coordinate":
        if not isinstance(g, CharSum) or g.dim != F.dim:
            raise SpaceMismatch(f"expected a CharSum on T^{F.dim}")
        out = {}
        for u, c in g._terms.items():
            v = [0] * F.parent.dim
            for i, x in zip(F.coords, u):
                v[i] = x
            out[tuple(v)] = c
        return CharSum._raw(out, F.parent.dim)
    if not isinstance(g, PointVector) or g.space != F.space:
        raise SpaceMismatch("expected a point vector on the block space")
    return PointVector(g.values[F.block_of], F.parent.space)


def project_PY(F: FactorSpec, f: Observable) -> Observable:
    return embed(F, cond_expect(F, f))


def cond_inner(F: FactorSpec, f: Observable, g: Observable) -> Observable:
    """Conditional scalar product ``E_Y(f conj(g))``."""
    return cond_expect(F, f * conjugate(g))


def cond_norm(F: FactorSpec, f: Observable, resolution: int | None = None) -> PointVector:
    """``(E_Y |f|^2)^(1/2)``: exact on finite factor spaces, sampled on a grid for torus factors."""
    sq = cond_inner(F, f, f)
    if isinstance(sq, CharSum):
        sq = sample(sq, resolution)
    return PointVector(np.sqrt(np.clip(sq.values.real, 0.0, None)), sq.space)


def cond_sup_norm(F: FactorSpec, f: Observable, resolution: int | None = None) -> float:
    """``|| ||f||_{L2(X|Y)} ||_{L^inf(Y)}`` (grid maximum for torus factors)."""
    cn = cond_norm(F, f, resolution)
    mask = cn.space.w > 0
    return float(np.max(cn.values.real[mask]))


def l1_on_y(F: FactorSpec, y_terms_or_obs, resolution: int | None = None) -> float:
    """``L^1(Y)`` norm of a factor observable (raw Y-terms allowed for torus factors)."""
    if isinstance(y_terms_or_obs, Observable):
        obs = y_terms_or_obs
        if isinstance(obs, CharSum):
            y_terms_or_obs = dict(obs._terms)
        else:
            return norm(obs, 1).value
    if isinstance(y_terms_or_obs, complex):
        return abs(y_terms_or_obs)
    t = y_terms_or_obs
    if len(t) <= 1:
        return abs(next(iter(t.values()), 0j))
    return norm(CharSum._raw(t, F.dim), 1, resolution).value


def l2sq_on_y(F: FactorSpec, y) -> float:
    if isinstance(y, complex):
        return abs(y) ** 2
    if isinstance(y, PointVector):
        return float(fsum_array(y.space.w * np.abs(y.values) ** 2).real)
    return math.fsum(abs(c) ** 2 for c in y.values())


def _self_correlations(F: FactorSpec, f: Observable, N: int):
    """``E_Y(T^n f conj f)`` for ``n = 1..N`` in raw form."""
    sys = F.parent
    if isinstance(f, CharSum):
        fc = conj_terms(f._terms)
        for tn in sys.orbit(f._terms, N):
            yield cond_expect_terms(F, mul_terms(tn, fc))
    else:
        fc = np.conj(f.values)
        for n in range(1, N + 1):
            prod = PointVector(sys.koopman_values(f.values, n) * fc, f.space)
            if F.variant == "full":
                yield prod
            else:
                yield cond_expect(F, prod)


def cond_wm_score(F: FactorSpec, f: Observable, schedule: Sequence[int], variant: str = "L1",
                  resolution: int | None = None) -> AverageTrace:
    """Finite-N conditional weak-mixing averages ``(1/N) sum_{n<=N} ||<T^n f, f>_{X|Y}||``.

    ``variant="L1"`` is the L^1(Y) average; ``variant="L2"`` averages the squared
    L^2(Y) norm instead. The two are reported separately, not identified.
    """
    _check_parent(F, f)
    sched = validate_schedule(schedule)
    if variant not in ("L1", "L2"):
        raise ValueError("variant must be 'L1' or 'L2'")
    terms = []
    for y in _self_correlations(F, f, sched[-1]):
        terms.append(l1_on_y(F, y, resolution) if variant == "L1" else l2sq_on_y(F, y))
    values = [math.fsum(terms[:N]) / N for N in sched]
    return AverageTrace(sched, values, meta={"variant": variant, "factor": F.ident, "terms": terms})


# --------------------------------------------------------------------------
# conditional almost periodicity for characters


@dataclass
class EigenReport:
    decision: str  # "yes" | "no" | "undecided"
    generator: Observable | None = None
    coefficient_sup: float | None = None
    conditionally_ap: bool | None = None
    distance: float | None = None
    detail: str = ""
    extra: dict = field(default_factory=dict)


def _torus_character(f: Observable):
    if isinstance(f, CharSum) and f.is_character():
        (v, c), = f._terms.items()
        return v, c
    return None


def cond_eigen_check(F: FactorSpec, f: Observable) -> EigenReport:
    """Does the orbit ``{T^n f}`` lie in a rank-one module ``{c g : ||c||_inf <= 1}``?"""
    _check_parent(F, f)
    if F.variant == "full":
        return EigenReport("yes", f, 1.0, True, 0.0, "f is measurable w.r.t. the full factor")
    if isinstance(f, CharSum):
        ch = _torus_character(f)
        if ch is None:
            return EigenReport("undecided", detail="membership is decided only for single characters")
        v, c = ch
        sys: TorusSystem = F.parent
        rest = [i for i in range(sys.dim) if i not in set(F.kept_coords)]
        A = sys.freq_matrix
        vr = np.array([v[i] for i in rest], dtype=object)
        Arr = A[np.ix_(rest, rest)]
        fixed = bool(np.all(Arr.dot(vr) == vr)) if rest else True
        if fixed:
            g = {tuple(v[i] if i in rest else 0 for i in range(sys.dim)): c}
            return EigenReport("yes", CharSum._raw(g, sys.dim), 1.0, True, 0.0,
                               "frequency part outside the factor is invariant")
        return EigenReport("no", None, None, None, None,
                           "frequency part outside the factor moves; no rank-one module holds the orbit")
    return _finite_eigen_check(F, f)


def _finite_eigen_check(F: FactorSpec, f: PointVector) -> EigenReport:
    sys: FiniteSystem = F.parent
    mask = sys.space.w > 0
    mod = np.abs(f.values[mask])
    if not mask.any() or mod.min() == 0 or mod.max() - mod.min() > 1e-12 * mod.max():
        return EigenReport("undecided", detail="membership is decided only for unimodular-type vectors",
                           conditionally_ap=True)
    for n in range(1, sys.period + 1):
        r = sys.koopman_values(f.values, n) / f.values
        if F.variant == "trivial":
            ok = np.ptp(r[mask].real) <= 1e-12 and np.ptp(r[mask].imag) <= 1e-12
        else:
            ok = True
            for b in F.blocks:
                idx = [x for x in b if mask[x]]
                if idx and (np.ptp(r[idx].real) > 1e-12 or np.ptp(r[idx].imag) > 1e-12):
                    ok = False
                    break
        if not ok:
            return EigenReport("no", None, None, True, None,
                               "finite orbit: conditionally almost periodic, but not rank one")
    return EigenReport("yes", f, 1.0, True, 0.0, "orbit is f times factor-measurable unimodular functions")


def cond_ap_check(F: FactorSpec, f: Observable, N: int) -> EigenReport:
    """Zonotope distance ``sup_{n<=N} inf_{||c||_inf<=1} ||T^n f - c g||_{L^{2,inf}(X|Y)}``."""
    rep = cond_eigen_check(F, f)
    if rep.decision == "undecided":
        return rep
    g = rep.generator if rep.generator is not None else f
    if isinstance(f, CharSum):
        (u, _), = g._terms.items()
        sys: TorusSystem = F.parent
        (v, _), = f._terms.items()
        dist = 0.0
        first_miss = None
        for n in range(1, N + 1):
            w, _ = sys.image(v, n)
            # E_Y(e_{w-u}) vanishes unless w - u is factor-measurable; then the best c is 0
            if not F.measurable_freq(tuple(a - b for a, b in zip(w, u))):
                dist = 1.0
                first_miss = n
                break
        rep.distance = dist
        rep.extra["first_escape"] = first_miss
        rep.decision = "yes" if dist == 0.0 else "no"
        if rep.conditionally_ap is None:
            rep.conditionally_ap = dist == 0.0
        return rep
    sys = F.parent
    w = sys.space.w
    worst = 0.0
    blocks = F.blocks if F.variant == "partition" else [tuple(range(sys.space.size))]
    if F.variant == "full":
        blocks = [(x,) for x in range(sys.space.size)]
    for n in range(1, N + 1):
        h = sys.koopman_values(f.values, n)
        for b in blocks:
            idx = list(b)
            mass = float(np.sum(w[idx]))
            if mass == 0:
                continue
            gg = float(np.sum(w[idx] * np.abs(g.values[idx]) ** 2))
            hg = complex(np.sum(w[idx] * h[idx] * np.conj(g.values[idx])))
            c = hg / gg if gg > 0 else 0j
            if abs(c) > 1:
                c /= abs(c)
            res = float(np.sum(w[idx] * np.abs(h[idx] - c * g.values[idx]) ** 2)) / mass
            worst = max(worst, res)
    rep.distance = math.sqrt(worst)
    rep.decision = "yes" if rep.distance <= 1e-12 else "no"
    return rep
