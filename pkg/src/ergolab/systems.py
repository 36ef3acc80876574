"""Catalog of measure-preserving systems and their Koopman operators.

Torus systems act on characters by ``T^n e_v = e(q . alpha) e_w`` with an
integer frequency image ``w`` and an integer phase vector ``q`` over the
system's rotation numbers ``alpha``; :meth:`TorusSystem.image` returns
``(w, q)`` exactly. Finite systems act on point vectors by a permutation,
``(T f)(x) = f(sigma(x))``.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterator

import numpy as np

from . import phase
from .observables import (CharSum, FiniteSpace, Observable, PointVector,
                          SpaceMismatch, inner_product, normalized_weights, random_charsum)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
SQRT2 = math.sqrt(2.0) - 1.0
NAMED_ALPHAS = {"golden": GOLDEN, "sqrt2": SQRT2, "sqrt3": math.sqrt(3.0) - 1.0}

ALL = "all"  # sentinel: every m in [1, N] returns


class System:
    kind: str = ""

    @property
    def ident(self) -> str:
        raise NotImplementedError

    @property
    def ergodic(self) -> str:
        return "unknown"

    def __str__(self):
        return self.ident


# --------------------------------------------------------------------------
# torus systems


class TorusSystem(System):
    kind = "torus"
    dim: int

    @property
    def alphas(self) -> tuple[float, ...]:
        return ()

    @property
    def freq_matrix(self) -> np.ndarray:
        """Integer matrix ``A`` with ``T e_v`` a multiple of ``e_{A v}``."""
        raise NotImplementedError

    def image(self, v: tuple[int, ...], n: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
        raise NotImplementedError

    def is_fixed(self, v) -> bool:
        return self.image(tuple(v), 1)[0] == tuple(v)

    def lin_phase(self, v) -> tuple[int, ...]:
        """For a fixed frequency, ``T^m e_v = e(m q.alpha) e_v``; returns ``q``."""
        return self.image(tuple(v), 1)[1]

    def returns(self, v, w, N: int):
        """Every ``m`` in ``[1, N]`` with ``A^m v = w`` (or :data:`ALL`)."""
        raise NotImplementedError

    def orbit_key(self, v):
        """Invariant of the frequency orbit: ``A^m v = w`` forces equal keys."""
        return 0

    def phase_value(self, q) -> complex:
        return phase.e_dot(q, self.alphas)

    def koopman_terms(self, terms, n: int) -> dict:
        out: dict = {}
        al = self.alphas
        for v, c in terms.items():
            w, q = self.image(v, n)
            out[w] = out.get(w, 0j) + c * phase.e_dot(q, al)
        return out

    def orbit(self, terms, count: int, step: int = 1) -> Iterator[dict]:
        """``T^{step n} f`` for ``n = 1..count`` as raw coefficient maps."""
        for n in range(1, count + 1):
            yield self.koopman_terms(terms, step * n)


@dataclass(frozen=True)
class TorusRotation(TorusSystem):
    alpha: tuple[float, ...]
    irrational: bool = True

    def __post_init__(self):
        a = tuple(float(x) for x in np.atleast_1d(self.alpha))
        if any(not 0.0 <= x < 1.0 for x in a):
            raise ValueError("rotation numbers must lie in [0, 1)")
        object.__setattr__(self, "alpha", a)

    @property
    def dim(self):
        return len(self.alpha)

    @property
    def alphas(self):
        return self.alpha

    @property
    def ident(self):
        return f"rot{self.dim}:" + ",".join(_alpha_name(a) for a in self.alpha)

    @property
    def ergodic(self):
        return "yes" if self.irrational else "unknown"

    @cached_property
    def freq_matrix(self):
        return np.eye(self.dim, dtype=object)

    def image(self, v, n):
        return v, tuple(n * x for x in v)

    def is_fixed(self, v):
        return True

    def lin_phase(self, v):
        return tuple(v)

    def orbit_key(self, v):
        return tuple(v)

    def returns(self, v, w, N):
        return ALL if v == w else []


@dataclass(frozen=True)
class AnzaiSkew(TorusSystem):
    """``(x, y) -> (x + alpha, y + x)``."""

    alpha: float = GOLDEN
    irrational: bool = True

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError("rotation number must lie in [0, 1)")

    dim = 2

    @property
    def alphas(self):
        return (self.alpha,)

    @property
    def ident(self):
        return f"anzai:{_alpha_name(self.alpha)}"

    @property
    def ergodic(self):
        return "yes" if self.irrational else "unknown"

    @cached_property
    def freq_matrix(self):
        return np.array([[1, 1], [0, 1]], dtype=object)

    def image(self, v, n):
        k, l = v
        return (k + l * n, l), (k * n + l * (n * (n - 1) // 2),)

    def is_fixed(self, v):
        return v[1] == 0

    def lin_phase(self, v):
        return (v[0],)

    def orbit_key(self, v):
        return v[1]

    def returns(self, v, w, N):
        (a, b), (c, d) = v, w
        if b != d:
            return []
        if b == 0:
            return ALL if a == c else []
        diff = c - a
        if diff % b:
            return []
        m = diff // b
        return [m] if 1 <= m <= N else []




@dataclass(frozen=True)
class CatMap(TorusSystem):
    """Toral automorphism ``x -> M x``; characters move by ``e_k -> e_{M^T k}``."""

    matrix: tuple[tuple[int, int], tuple[int, int]] = ((2, 1), (1, 1))

    def __post_init__(self):
        m = tuple(tuple(int(x) for x in row) for row in self.matrix)
        if len(m) != 2 or any(len(r) != 2 for r in m):
            raise ValueError("cat map needs a 2x2 integer matrix")
        if abs(m[0][0] * m[1][1] - m[0][1] * m[1][0]) != 1:
            raise ValueError("cat map matrix must be unimodular")
        object.__setattr__(self, "matrix", m)

    dim = 2

    @property
    def ident(self):
        (a, b), (c, d) = self.matrix
        return "catmap" if self.matrix == ((2, 1), (1, 1)) else f"catmap:{a},{b},{c},{d}"

    @property
    def det(self) -> int:
        (a, b), (c, d) = self.matrix
        return a * d - b * c

    @property
    def trace(self) -> int:
        return self.matrix[0][0] + self.matrix[1][1]

    @property
    def hyperbolic(self) -> bool:
        # no eigenvalue is a root of unity
        return abs(self.trace) > 2 if self.det == 1 else self.trace != 0

    @property
    def ergodic(self):
        return "yes" if self.hyperbolic else "no"

    @cached_property
    def freq_matrix(self):
        (a, b), (c, d) = self.matrix
        return np.array([[a, c], [b, d]], dtype=object)

    @cached_property
    def _A(self):
        (a, b), (c, d) = self.matrix
        return ((a, c), (b, d))

    @cached_property
    def _Ainv(self):
        (a, c), (b, d) = self._A
        det = a * d - b * c
        return ((d * det, -c * det), (-b * det, a * det))

    def power(self, n: int):
        cache = self.__dict__.setdefault("_power_cache", {})
        P = cache.get(n)
        if P is None:
            P = _mat_pow(self._A if n >= 0 else self._Ainv, abs(n))
            if abs(n) <= 1 << 16:
                cache[n] = P
        return P

    def image(self, v, n):
        return _mat_vec(self.power(n), v), ()

    def is_fixed(self, v):
        return _mat_vec(self._A, v) == tuple(v)

    def lin_phase(self, v):
        return ()

    def orbit(self, terms, count, step=1):
        P = self.power(step)
        cur = dict(terms)
        for _ in range(count):
            cur = {_mat_vec(P, v): c for v, c in cur.items()}
            yield cur

    @cached_property
    def _form(self):
        # integer symmetric S with A^T S A = sign * S
        (a, b), (c, d) = self._A
        S = ((2 * c, d - a), (d - a, -2 * b))
        AtSA = _mat_mul(_transpose(self._A), _mat_mul(S, self._A))
        sign = 1 if AtSA == S else -1
        assert AtSA == (S if sign == 1 else tuple(tuple(-x for x in r) for r in S))
        return S, sign

    def _Q(self, v):
        S, _ = self._form
        return v[0] * (S[0][0] * v[0] + S[0][1] * v[1]) + v[1] * (S[1][0] * v[0] + S[1][1] * v[1])

    def orbit_key(self, v):
        if not self.hyperbolic:
            return 0
        q = self._Q(v)
        return q if self._form[1] == 1 else abs(q)

    @cached_property
    def _expanding(self):
        # left eigenvector u with u A = lam u, |lam| > 1
        vals, vecs = np.linalg.eig(np.array(self._A, dtype=float).T)
        i = int(np.argmax(np.abs(vals)))
        u = vecs[:, i].real
        return u / np.linalg.norm(u), abs(vals[i].real)

    def returns(self, v, w, N):
        v, w = tuple(v), tuple(w)
        if not self.hyperbolic:
            if v == w and self.is_fixed(v):
                return ALL
            out, cur = [], v
            for m in range(1, N + 1):
                cur = _mat_vec(self._A, cur)
                if cur == w:
                    out.append(m)
            return out
        if v == w:
            return ALL if v == (0, 0) else []
        if v == (0, 0) or w == (0, 0):
            return []
        if w == (-v[0], -v[1]):
            return []
        qv, qw = self._Q(v), self._Q(w)
        if qv != qw and qv != -qw:
            return []
        # u.A^m v = lam^m u.v fixes m up to rounding; entries may exceed float range
        u, lam = self._expanding
        lv, lw = self._log_expanding(v), self._log_expanding(w)
        if lv is None or lw is None:
            cands = range(1, N + 1)
        else:
            m0 = round((lw - lv) / math.log(lam))
            if m0 < -1 or m0 > N + 2:
                return []
            cands = range(max(1, m0 - 2), min(N, m0 + 2) + 1)
        return [m for m in cands if _mat_vec(self.power(m), v) == w]

    def _log_expanding(self, v):
        """``log |u.v|``, or None when ``v`` is too close to the stable line to trust floats."""
        u, _ = self._expanding
        top = max(abs(v[0]), abs(v[1]))
        cos = abs(u[0] * (v[0] / top) + u[1] * (v[1] / top))
        return math.log(top) + math.log(cos) if cos > 1e-9 else None


def _mat_mul(A, B):
    return tuple(tuple(sum(A[i][k] * B[k][j] for k in range(2)) for j in range(2)) for i in range(2))


def _transpose(A):
    return ((A[0][0], A[1][0]), (A[0][1], A[1][1]))


def _mat_vec(A, v):
    return (A[0][0] * v[0] + A[0][1] * v[1], A[1][0] * v[0] + A[1][1] * v[1])


def _mat_pow(A, n):
    result = ((1, 0), (0, 1))
    while n:
        if n & 1:
            result = _mat_mul(result, A)
        A = _mat_mul(A, A)
        n >>= 1
    return result


# --------------------------------------------------------------------------
# finite systems


class FiniteSystem(System):
    kind = "finite"
    space: FiniteSpace

    def index_map(self, n: int) -> np.ndarray:
        """``idx`` with ``(T^n f)(x) = f(idx[x])``."""
        raise NotImplementedError

    @property
    def period(self) -> int:
        """Order of the permutation: averages over one period are exact limits."""
        raise NotImplementedError

    def cycles(self) -> list[list[int]]:
        raise NotImplementedError

    def koopman_values(self, values: np.ndarray, n: int) -> np.ndarray:
        return values[self.index_map(n)]


@dataclass(frozen=True)
class CyclicShift(FiniteSystem):
    """Rotation ``x -> x + 1`` on ``Z_N`` with uniform weights."""

    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("N must be positive")

    @cached_property
    def space(self):
        return FiniteSpace.uniform(self.n, self.ident)

    @property
    def ident(self):
        return f"zshift:{self.n}"

    @property
    def ergodic(self):
        return "yes"

    @property
    def period(self):
        return self.n

    def index_map(self, n):
        return (np.arange(self.n) + n) % self.n

    def koopman_values(self, values, n):
        return np.roll(values, -(n % self.n))

    def cycles(self):
        return [list(range(self.n))]


@dataclass(frozen=True)
class FinitePermutation(FiniteSystem):
    perm: tuple[int, ...]
    weights: tuple[float, ...] | None = None
    label: str = ""

    def __post_init__(self):
        p = tuple(int(x) for x in self.perm)
        if sorted(p) != list(range(len(p))):
            raise ValueError("perm is not a bijection of {0..n-1}")
        object.__setattr__(self, "perm", p)
        w = self.weights
        if w is None:
            w = tuple([1.0 / len(p)] * len(p))
        w = tuple(float(x) for x in w)
        if len(w) != len(p):
            raise ValueError("one weight per point required")
        object.__setattr__(self, "weights", w)
        FiniteSpace(w)  # validates
        if any(w[i] != w[p[i]] for i in range(len(p))):
            raise ValueError("weights must be constant on cycles for the measure to be preserved")

    @cached_property
    def space(self):
        return FiniteSpace(self.weights, self.ident)

    @property
    def ident(self):
        return self.label or ("perm:" + ",".join(map(str, self.perm)))

    def cycles(self):
        seen, out = set(), []
        for s in range(len(self.perm)):
            if s in seen:
                continue
            cyc, x = [], s
            while x not in seen:
                seen.add(x)
                cyc.append(x)
                x = self.perm[x]
            out.append(cyc)
        return out

    @cached_property
    def _cycle_tables(self):
        n = len(self.perm)
        members, offset, pos, length = [], np.empty(n, np.int64), np.empty(n, np.int64), np.empty(n, np.int64)
        for cyc in self.cycles():
            base = len(members)
            for i, x in enumerate(cyc):
                offset[x], pos[x], length[x] = base, i, len(cyc)
            members.extend(cyc)
        return np.array(members, dtype=np.int64), offset, pos, length

    def index_map(self, n):
        members, offset, pos, length = self._cycle_tables
        return members[offset + (pos + n) % length]

    @property
    def period(self):
        return math.lcm(*[len(c) for c in self.cycles()])

    @property
    def ergodic(self):
        return "yes" if len(self.cycles()) == 1 and len(set(self.weights)) == 1 else "no"


# --------------------------------------------------------------------------
# products


@dataclass(frozen=True)
class Product(System):
    parts: tuple[System, ...]

    def __post_init__(self):
        parts = tuple(self.parts)
        if not parts:
            raise ValueError("empty product")
        kinds = {p.kind for p in parts}
        if len(kinds) != 1:
            raise ValueError("products must be all-torus or all-finite")
        object.__setattr__(self, "parts", parts)

    @property
    def ident(self):
        return "prod(" + ",".join(p.ident for p in self.parts) + ")"

    @property
    def kind(self):
        return self.parts[0].kind

    @property
    def ergodic(self):
        if any(p.ergodic == "no" for p in self.parts):
            return "no"
        return "unknown"


@dataclass(frozen=True)
class TorusProduct(Product, TorusSystem):
    @property
    def kind(self):
        return "torus"

    @cached_property
    def dims(self):
        return tuple(p.dim for p in self.parts)

    @property
    def dim(self):
        return sum(self.dims)

    @cached_property
    def alphas(self):
        return tuple(a for p in self.parts for a in p.alphas)

    def split(self, v):
        out, i = [], 0
        for d in self.dims:
            out.append(tuple(v[i:i + d]))
            i += d
        return out

    @cached_property
    def freq_matrix(self):
        A = np.zeros((self.dim, self.dim), dtype=object)
        i = 0
        for p in self.parts:
            A[i:i + p.dim, i:i + p.dim] = p.freq_matrix
            i += p.dim
        return A

    def image(self, v, n):
        w, q = (), ()
        for p, part in zip(self.parts, self.split(v)):
            pw, pq = p.image(part, n)
            w += pw
            q += pq
        return w, q

    def is_fixed(self, v):
        return all(p.is_fixed(x) for p, x in zip(self.parts, self.split(v)))

    def lin_phase(self, v):
        return tuple(q for p, x in zip(self.parts, self.split(v)) for q in p.lin_phase(x))

    def orbit_key(self, v):
        return tuple(p.orbit_key(x) for p, x in zip(self.parts, self.split(v)))

    def returns(self, v, w, N):
        acc = ALL
        for p, a, b in zip(self.parts, self.split(v), self.split(w)):
            r = p.returns(a, b, N)
            if r == ALL:
                continue
            acc = r if acc == ALL else sorted(set(acc) & set(r))
            if not acc:
                return []
        return acc


@dataclass(frozen=True)
class FiniteProduct(Product, FiniteSystem):
    @property
    def kind(self):
        return "finite"

    @cached_property
    def flat(self) -> FinitePermutation:
        perm = np.zeros(1, dtype=np.int64)
        w = np.ones(1)
        for p in self.parts:
            n = p.space.size
            pp = p.index_map(1)
            perm = (perm[:, None] * n + pp[None, :]).ravel()
            w = (w[:, None] * p.space.w[None, :]).ravel()
        return FinitePermutation(tuple(perm.tolist()), normalized_weights(w), self.ident)

    @cached_property
    def space(self):
        return self.flat.space

    def index_map(self, n):
        return self.flat.index_map(n)

    @property
    def period(self):
        return self.flat.period

    def cycles(self):
        return self.flat.cycles()


def product(*parts: System) -> Product:
    if all(p.kind == "torus" for p in parts):
        return TorusProduct(tuple(parts))
    if all(p.kind == "finite" for p in parts):
        return FiniteProduct(tuple(parts))
    raise ValueError("products must be all-torus or all-finite")


# --------------------------------------------------------------------------
# Koopman operator


def check_on(sys: System, f: Observable) -> None:
    if sys.kind == "torus":
        if not isinstance(f, CharSum) or f.dim != sys.dim:
            raise SpaceMismatch(f"observable does not live on {sys.ident} (torus of dimension {sys.dim})")
    else:
        if not isinstance(f, PointVector) or f.space.weights != sys.space.weights or f.space.size != sys.space.size:
            raise SpaceMismatch(f"observable does not live on {sys.ident}")


def koopman(sys: System, f: Observable, n: int = 1) -> Observable:
    """``T^n f = f o phi^n``; negative `n` uses the inverse map."""
    check_on(sys, f)
    n = int(n)
    if sys.kind == "torus":
        return CharSum._raw(sys.koopman_terms(f._terms, n), f.dim)
    return PointVector(sys.koopman_values(f.values, n), f.space)


# --------------------------------------------------------------------------
# verification


@dataclass
class SystemReport:
    system: str
    checks: list[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c["ok"] for c in self.checks)

    @property
    def verdict(self) -> str:
        if self.passed:
            return "measure-preserving"
        if any(c["check"] == "isometry" and not c["ok"] for c in self.checks):
            return "not measure-preserving"
        return "failed"


def random_observable(sys: System, rng: np.random.Generator, real: bool = False) -> Observable:
    if sys.kind == "torus":
        return random_charsum(rng, sys.dim, n_terms=int(rng.integers(1, 6)), max_freq=3, real=real)
    v = rng.normal(size=sys.space.size)
    if not real:
        v = v + 1j * rng.normal(size=sys.space.size)
    return PointVector(v, sys.space)


def _distance(f: Observable, g: Observable) -> float:
    d = f - g
    return math.sqrt(max(inner_product(d, d).real, 0.0))


def verify_system(sys: System, samples: int = 8, seed: int = 0, tol: float = 1e-12) -> SystemReport:
    rng = np.random.default_rng(seed)
    rep = SystemReport(sys.ident)
    for i in range(samples):
        f = random_observable(sys, rng)
        g = random_observable(sys, rng)
        lhs = inner_product(koopman(sys, f, 1), koopman(sys, g, 1))
        rhs = inner_product(f, g)
        scale_ = 1.0 + abs(rhs)
        rep.checks.append({"check": "isometry", "sample": i, "error": abs(lhs - rhs),
                           "ok": abs(lhs - rhs) <= tol * scale_})
        back = koopman(sys, koopman(sys, f, -1), 1)
        err = _distance(back, f)
        rep.checks.append({"check": "inverse", "sample": i, "error": err, "ok": err <= tol * (1.0 + _distance(f, 0 * f))})
    return rep


# --------------------------------------------------------------------------
# catalog ids


def _alpha_name(a: float) -> str:
    for name, val in NAMED_ALPHAS.items():
        if a == val:
            return name
    return repr(a)


def _parse_alpha(tok: str) -> tuple[float, bool]:
    tok = tok.strip()
    if tok in NAMED_ALPHAS:
        return NAMED_ALPHAS[tok], True
    if "/" in tok:
        p, q = tok.split("/")
        return (int(p) / int(q)) % 1.0, False
    return float(tok) % 1.0, False


def _split_top(s: str) -> list[str]:
    parts, depth, cur = [], 0, ""
    for ch in s:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append(cur)
            cur = ""
        else:
            cur += ch
    parts.append(cur)
    return [p.strip() for p in parts if p.strip()]


def parse_system(spec: str, base_dir: str | os.PathLike | None = None) -> System:
    """Build a system from a catalog id such as ``zshift:8`` or ``prod(rot1:golden,catmap)``."""
    s = spec.strip()
    if s.startswith("prod(") and s.endswith(")"):
        return product(*[parse_system(p, base_dir) for p in _split_top(s[5:-1])])
    head, _, arg = s.partition(":")
    if head == "zshift":
        return CyclicShift(int(arg))
    if head.startswith("rot"):
        d = int(head[3:] or 1)
        if arg in ("", "golden") and d == 2:
            return TorusRotation((GOLDEN, SQRT2), True)
        toks = [t for t in arg.split(",") if t] or ["golden"]
        parsed = [_parse_alpha(t) for t in toks]
        if len(parsed) == 1 and d > 1:
            raise ValueError(f"{spec}: give {d} rotation numbers")
        if len(parsed) != d:
            raise ValueError(f"{spec}: expected {d} rotation numbers")
        alphas = tuple(a for a, _ in parsed)
        irr = all(flag for _, flag in parsed) and len(set(toks)) == len(toks)
        return TorusRotation(alphas, irr)
    if head == "anzai":
        a, irr = _parse_alpha(arg or "golden")
        return AnzaiSkew(a, irr)
    if head == "catmap":
        if not arg:
            return CatMap()
        a, b, c, d = (int(x) for x in arg.split(","))
        return CatMap(((a, b), (c, d)))
    if head == "perm":
        if arg.endswith(".json"):
            path = Path(base_dir or ".") / arg
            data = json.loads(Path(path).read_text())
            return FinitePermutation(tuple(data["perm"]), tuple(data["weights"]) if "weights" in data else None,
                                     label=s)
        return FinitePermutation(tuple(int(x) for x in arg.split(",")))
    raise ValueError(f"unknown system id {spec!r}")


CATALOG = {
    "zshift:N": "cyclic shift x -> x+1 on Z_N, uniform weights",
    "rot1:golden": "circle rotation by (sqrt5-1)/2",
    "rot2:golden": "rotation of T^2 by ((sqrt5-1)/2, sqrt2-1)",
    "rotd:a1,...,ad": "rotation of T^d (named numbers golden/sqrt2/sqrt3 are flagged irrational)",
    "anzai:golden": "skew product (x, y) -> (x+alpha, y+x)",
    "catmap": "hyperbolic automorphism [[2,1],[1,1]] of T^2 (catmap:a,b,c,d for others)",
    "perm:file.json": "permutation with weights from JSON {perm, weights}",
    "prod(a,b,...)": "direct product of catalog systems of the same kind",
}
