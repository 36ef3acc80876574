"""Observables: trigonometric polynomials on tori and vectors on finite spaces.

Two exact representations are supported:

* :class:`CharSum` -- a finite sum ``sum_k c_k e_k`` of characters
  ``e_k(x) = exp(2 pi i k.x)`` on the torus ``T^d``;
* :class:`PointVector` -- one complex value per point of a :class:`FiniteSpace`.

The raw coefficient maps (``dict[tuple[int, ...], complex]``) are manipulated by
the ``*_terms`` helpers. They use unbounded Python integers; the 64-bit
frequency bound is enforced only when a public :class:`CharSum` is built.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping

import numpy as np

from . import config
from .reduction import fsum_array, fsum_complex

FREQ_MAX = 2**63 - 1
FREQ_MIN = -(2**63)

Terms = dict  # tuple[int, ...] -> complex


class FrequencyOverflow(OverflowError):
    """A frequency coordinate left the signed 64-bit range."""


class SpaceMismatch(ValueError):
    """Two observables live on different spaces or representations."""


# --------------------------------------------------------------------------
# finite spaces


@dataclass(frozen=True)
class FiniteSpace:
    weights: tuple[float, ...]
    label: str = ""

    def __post_init__(self):
        if not self.weights:
            raise ValueError("a finite space needs at least one point")
        if any(w < 0 or not math.isfinite(w) for w in self.weights):
            raise ValueError("weights must be finite and nonnegative")
        total = math.fsum(self.weights)
        if abs(total - 1.0) > 1e-15 * max(1.0, math.log2(len(self.weights))):
            raise ValueError(f"weights sum to {total!r}, not 1")

    @classmethod
    def uniform(cls, n: int, label: str = "") -> "FiniteSpace":
        return cls(tuple([1.0 / n] * n), label)

    @property
    def size(self) -> int:
        return len(self.weights)

    @cached_property
    def w(self) -> np.ndarray:
        a = np.array(self.weights, dtype=float)
        a.setflags(write=False)
        return a

    @cached_property
    def is_uniform(self) -> bool:
        return len(set(self.weights)) == 1


def normalized_weights(raw: Iterable[float]) -> tuple[float, ...]:
    raw = [float(x) for x in raw]
    total = math.fsum(raw)
    ws = [x / total for x in raw]
    # put the rounding residue on the heaviest point
    i = max(range(len(ws)), key=lambda j: ws[j])
    ws[i] += 1.0 - math.fsum(ws)
    return tuple(ws)


# --------------------------------------------------------------------------
# raw coefficient maps


def _eps(eps):
    return config.current().prune_eps if eps is None else eps


def prune_terms(t: Mapping, eps: float | None = None) -> Terms:
    eps = _eps(eps)
    return {k: c for k, c in t.items() if c != 0 and abs(c) >= eps}


def add_terms(a: Mapping, b: Mapping, sign: int = 1, eps: float | None = None) -> Terms:
    out = dict(a)
    for k, c in b.items():
        out[k] = out.get(k, 0j) + sign * c
    return prune_terms(out, eps)


def scale_terms(a: Mapping, c: complex, eps: float | None = None) -> Terms:
    return prune_terms({k: c * v for k, v in a.items()}, eps)


def conj_terms(a: Mapping) -> Terms:
    return {tuple(-x for x in k): v.conjugate() for k, v in a.items()}


def mul_terms(a: Mapping, b: Mapping, eps: float | None = None) -> Terms:
    """Convolution of coefficient maps (``e_k e_l = e_{k+l}``)."""
    if len(a) > len(b):
        a, b = b, a
    out: dict = {}
    for k, c in a.items():
        for l, d in b.items():
            key = tuple(x + y for x, y in zip(k, l))
            out[key] = out.get(key, 0j) + c * d
    return prune_terms(out, eps)


def integral_terms(a: Mapping, dim: int) -> complex:
    return complex(a.get((0,) * dim, 0j))


def inner_terms(a: Mapping, b: Mapping) -> complex:
    small, other, flip = (a, b, False) if len(a) <= len(b) else (b, a, True)
    vals = []
    for k, c in small.items():
        d = other.get(k)
        if d is not None:
            vals.append(d * c.conjugate() if flip else c * d.conjugate())
    return fsum_complex(vals)


def check_frequency(k: tuple[int, ...]) -> None:
    for x in k:
        if x > FREQ_MAX or x < FREQ_MIN:
            raise FrequencyOverflow(f"frequency coordinate {x} exceeds 64-bit range")


# --------------------------------------------------------------------------
# observables


class Observable:
    kind: str

    def __add__(self, other):
        return algebra_op(self, other, "add")

    def __sub__(self, other):
        return algebra_op(self, other, "sub")

    def __mul__(self, other):
        if isinstance(other, Observable):
            return algebra_op(self, other, "mul")
        return scale(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1)


class CharSum(Observable):
    """Trigonometric polynomial on ``T^dim``."""

    kind = "charsum"
    __slots__ = ("_terms", "dim")

    def __init__(self, terms: Mapping, dim: int, *, eps: float | None = None):
        if dim < 1:
            raise ValueError("dimension must be >= 1")
        clean = {}
        for k, c in terms.items():
            k = tuple(int(x) for x in k)
            if len(k) != dim:
                raise ValueError(f"frequency {k} has wrong dimension (expected {dim})")
            check_frequency(k)
            clean[k] = complex(c)
        self._terms = prune_terms(clean, eps)
        self.dim = dim

    @classmethod
    def _raw(cls, terms: Terms, dim: int) -> "CharSum":
        obj = cls.__new__(cls)
        for k in terms:
            check_frequency(k)
        obj._terms = terms
        obj.dim = dim
        return obj

    @property
    def terms(self) -> Mapping:
        return MappingProxyType(self._terms)

    @property
    def space_key(self):
        return ("torus", self.dim)

    def coefficient(self, k) -> complex:
        return self._terms.get(tuple(k), 0j)

    def support(self) -> list[tuple[int, ...]]:
        return sorted(self._terms)

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self) -> Iterator:
        return iter(sorted(self._terms.items()))

    def is_character(self) -> bool:
        return len(self._terms) == 1

    def is_real(self, tol: float = 0.0) -> bool:
        for k, c in self._terms.items():
            d = self._terms.get(tuple(-x for x in k), 0j)
            if abs(c - d.conjugate()) > tol:
                return False
        return True

    def evaluate(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros(len(pts), dtype=complex)
        for k, c in sorted(self._terms.items()):
            out += c * np.exp(2j * np.pi * (pts @ np.array(k, dtype=float)))
        return out

    def __eq__(self, other):
        return isinstance(other, CharSum) and self.dim == other.dim and self._terms == other._terms

    def __hash__(self):
        return hash((self.dim, frozenset(self._terms.items())))

    def __repr__(self):
        body = " + ".join(f"({c:.6g})e{k}" for k, c in sorted(self._terms.items())[:6])
        more = "" if len(self._terms) <= 6 else f" + ...({len(self._terms)} terms)"
        return f"CharSum[d={self.dim}]({body or '0'}{more})"


class PointVector(Observable):
    """Function on a finite probability space."""

    kind = "pointvector"
    __slots__ = ("values", "space")

    def __init__(self, values, space: FiniteSpace):
        v = np.array(values, dtype=complex).ravel()
        if v.shape[0] != space.size:
            raise ValueError(f"{v.shape[0]} values for a {space.size}-point space")
        if not np.all(np.isfinite(v)):
            raise ValueError("values must be finite")
        v.setflags(write=False)
        self.values = v
        self.space = space

    @property
    def space_key(self):
        return ("finite", self.space)

    def is_real(self, tol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.values.imag) <= tol))

    def __eq__(self, other):
        return (isinstance(other, PointVector) and self.space == other.space
                and np.array_equal(self.values, other.values))

    def __hash__(self):
        return hash((self.space, self.values.tobytes()))

    def __repr__(self):
        return f"PointVector[{self.space.label or self.space.size}]({np.array2string(self.values, precision=4)})"


# --------------------------------------------------------------------------
# constructors


def character(k, dim: int | None = None) -> CharSum:
    k = tuple(int(x) for x in np.atleast_1d(k))
    return CharSum({k: 1.0}, dim or len(k))


def constant(c: complex, dim: int) -> CharSum:
    return CharSum({(0,) * dim: c}, dim)


def fejer(degree, dim: int = 1, shift=None) -> CharSum:
    """Tensor product of (translated) Fejér kernels; nonnegative with integral 1.

    ``F_r(x) = sum_{|j|<=r} (1 - |j|/(r+1)) e(j x)``, translated by `shift`.
    """
    degs = [int(degree)] * dim if np.isscalar(degree) else [int(r) for r in degree]
    dim = len(degs)
    shift = [0.0] * dim if shift is None else [float(s) for s in np.atleast_1d(shift)]
    terms = {(): 1.0 + 0j}
    for r, t in zip(degs, shift):
        nxt = {}
        for key, c in terms.items():
            for j in range(-r, r + 1):
                w = 1.0 - abs(j) / (r + 1)
                ph = 1.0 if t == 0 else complex(np.exp(-2j * np.pi * j * t))
                nxt[key + (j,)] = c * w * ph
        terms = nxt
    return CharSum(terms, dim)


def random_charsum(rng: np.random.Generator, dim: int, n_terms: int = 4, max_freq: int = 3,
                   real: bool = False) -> CharSum:
    terms: dict = {}
    while len(terms) < n_terms:
        k = tuple(int(x) for x in rng.integers(-max_freq, max_freq + 1, size=dim))
        c = complex(rng.normal(), rng.normal())
        terms[k] = terms.get(k, 0j) + c
        if real:
            mk = tuple(-x for x in k)
            if mk == k:
                terms[k] = complex(terms[k].real, 0.0)
            else:
                terms[mk] = terms[k].conjugate()
    return CharSum(terms, dim)


def point_vector(values, space: FiniteSpace) -> PointVector:
    return PointVector(values, space)


def indicator(points: Iterable[int], space: FiniteSpace) -> PointVector:
    v = np.zeros(space.size)
    v[list(points)] = 1.0
    return PointVector(v, space)


# --------------------------------------------------------------------------
# algebra


def same_space(f: Observable, g: Observable) -> None:
    if f.kind != g.kind or f.space_key != g.space_key:
        raise SpaceMismatch(f"cannot combine {f.kind} on {_space_name(f)} with {g.kind} on {_space_name(g)}")


def _space_name(f):
    return f"T^{f.dim}" if isinstance(f, CharSum) else (f.space.label or f"{f.space.size}-point space")


def algebra_op(f: Observable, g: Observable, op: str, eps: float | None = None) -> Observable:
    same_space(f, g)
    if op not in ("add", "sub", "mul"):
        raise ValueError(f"unknown op {op!r}")
    if isinstance(f, CharSum):
        if op == "mul":
            t = mul_terms(f._terms, g._terms, eps)
        else:
            t = add_terms(f._terms, g._terms, 1 if op == "add" else -1, eps)
        return CharSum._raw(t, f.dim)
    if op == "add":
        v = f.values + g.values
    elif op == "sub":
        v = f.values - g.values
    else:
        v = f.values * g.values
    return PointVector(v, f.space)


def scale(f: Observable, c: complex, eps: float | None = None) -> Observable:
    c = complex(c)
    if isinstance(f, CharSum):
        return CharSum._raw(scale_terms(f._terms, c, eps), f.dim)
    return PointVector(c * f.values, f.space)


def conjugate(f: Observable) -> Observable:
    if isinstance(f, CharSum):
        return CharSum._raw(conj_terms(f._terms), f.dim)
    return PointVector(np.conj(f.values), f.space)


def prune(f: Observable, eps: float = 0.0) -> Observable:
    if isinstance(f, CharSum):
        return CharSum._raw(prune_terms(f._terms, eps), f.dim)
    return f


def integral(f: Observable) -> complex:
    if isinstance(f, CharSum):
        return integral_terms(f._terms, f.dim)
    return complex(fsum_array(f.space.w * f.values))


def inner_product(f: Observable, g: Observable) -> complex:
    same_space(f, g)
    if isinstance(f, CharSum):
        return inner_terms(f._terms, g._terms)
    if g is f:
        # |f|^2 keeps <f, f> exactly real
        return complex(fsum_array(f.space.w * np.abs(f.values) ** 2))
    return complex(fsum_array(f.space.w * f.values * np.conj(g.values)))


# --------------------------------------------------------------------------
# norms


@dataclass(frozen=True)
class NormReport:
    p: float
    value: float
    method: str  # "exact" | "grid-quadrature(R)" | "coefficient-bound"

    def __float__(self):
        return self.value


def sup_bound(f: Observable) -> float:
    """Upper bound for ``||f||_inf``: exact on finite spaces, coefficient sum on tori."""
    if isinstance(f, CharSum):
        return math.fsum(abs(c) for c in f._terms.values())
    mask = f.space.w > 0
    return float(np.max(np.abs(f.values[mask]))) if mask.any() else 0.0


def norm(f: Observable, p: float = 2.0, resolution: int | None = None) -> NormReport:
    p = float(p)
    if not p >= 1.0:
        raise ValueError("p must lie in [1, inf]")
    if isinstance(f, PointVector):
        if math.isinf(p):
            return NormReport(p, sup_bound(f), "exact")
        s = fsum_array(f.space.w * np.abs(f.values) ** p)
        return NormReport(p, float(s) ** (1.0 / p), "exact")
    if math.isinf(p):
        return NormReport(p, sup_bound(f), "coefficient-bound")
    if p == 2.0:
        return NormReport(p, math.sqrt(math.fsum(abs(c) ** 2 for c in f._terms.values())), "exact")
    R = resolution or config.current().quad_resolution
    if f.is_character() or not f._terms:
        c = next(iter(f._terms.values()), 0j)
        return NormReport(p, abs(c), "exact")
    return NormReport(p, grid_lp(f, p, R), f"grid-quadrature({R})")


# --------------------------------------------------------------------------
# grid evaluation


def _grid_rows(f: CharSum, R: int, rows: int = 256) -> Iterator[np.ndarray]:
    """Blocks of samples of `f` on the uniform grid ``(j/R)`` (row blocks for d = 2)."""
    if f.dim == 1:
        arr = np.zeros(R, dtype=complex)
        for k, c in sorted(f._terms.items()):
            arr[k[0] % R] += c
        yield np.fft.ifft(arr) * R
        return
    if f.dim != 2:
        raise ValueError("grid quadrature is limited to d <= 2")
    by_k1: dict[int, np.ndarray] = {}
    for (k1, k2), c in sorted(f._terms.items()):
        row = by_k1.setdefault(k1 % R, np.zeros(R, dtype=complex))
        row[k2 % R] += c
    k1s = sorted(by_k1)
    G = np.array([np.fft.ifft(by_k1[k]) * R for k in k1s])  # (n_k1, R) over y
    k1_arr = np.array(k1s, dtype=np.int64)
    for lo in range(0, R, rows):
        i = np.arange(lo, min(lo + rows, R), dtype=np.int64)
        E = np.exp(2j * np.pi * ((i[:, None] * k1_arr[None, :]) % R) / R)
        yield E @ G


def grid_values(f: CharSum, resolution: int | None = None) -> np.ndarray:
    R = resolution or config.current().quad_resolution
    blocks = list(_grid_rows(f, R))
    return blocks[0] if f.dim == 1 else np.vstack(blocks)


def grid_lp(f: CharSum, p: float, resolution: int | None = None) -> float:
    R = resolution or config.current().quad_resolution
    parts = [float(np.sum(np.abs(b) ** p)) for b in _grid_rows(f, R)]
    return (math.fsum(parts) / R**f.dim) ** (1.0 / p)


def grid_max_abs(f: CharSum, resolution: int | None = None) -> float:
    R = resolution or config.current().quad_resolution
    return max(float(np.max(np.abs(b))) for b in _grid_rows(f, R))


def grid_space(dim: int, resolution: int) -> FiniteSpace:
    return FiniteSpace.uniform(resolution**dim, f"grid:{resolution}^{dim}")


def sample(f: CharSum, resolution: int | None = None) -> PointVector:
    """Samples of `f` as a point vector on the quadrature grid."""
    R = resolution or config.current().quad_resolution
    return PointVector(grid_values(f, R).ravel(), grid_space(f.dim, R))


# --------------------------------------------------------------------------
# serialization


def to_json(f: Observable) -> dict:
    if isinstance(f, CharSum):
        return {
            "kind": "charsum",
            "dimension": f.dim,
            "terms": [[list(k), c.real, c.imag] for k, c in sorted(f._terms.items())],
        }
    return {
        "kind": "pointvector",
        "system": f.space.label,
        "weights": list(f.space.weights),
        "terms": [[[i], v.real, v.imag] for i, v in enumerate(f.values.tolist())],
    }


def from_json(d: Mapping, space: FiniteSpace | None = None) -> Observable:
    if d["kind"] == "charsum":
        return CharSum({tuple(k): complex(re, im) for k, re, im in d["terms"]}, int(d["dimension"]))
    if d["kind"] == "pointvector":
        if space is None:
            space = FiniteSpace(tuple(float(w) for w in d["weights"]), d.get("system", ""))
        v = np.zeros(space.size, dtype=complex)
        for (i,), re, im in d["terms"]:
            v[i] = complex(re, im)
        return PointVector(v, space)
    raise ValueError(f"unknown observable kind {d['kind']!r}")
