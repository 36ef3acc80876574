"""Finite-N Gowers-Host-Kra uniformity seminorms.

With ``Delta_n g = T^n g conj(g)`` and ``P_l = ||f||_{U_l}^{2^l}``::

    P_1(g)     = |int g|^2
    P_{l+1}(g) = (1/N) sum_{n=1}^N P_l(Delta_n g)

The same ``N`` is used at every level. On a finite system averaged over whole
periods the truncation is the exact value.

Torus evaluation rests on one structural fact about catalog systems. The
correlation ``<T^m g, g>`` splits into a part from frequencies fixed by the
frequency map, which is a trigonometric sum ``sum_q C_q e(m q.alpha)`` whose
mean square over ``m <= N`` has a closed form, and a part from pairs ``(v, w)``
with ``A^m v = w`` for isolated ``m``, found from the lattice.
"""
from __future__ import annotations

import itertools
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import config, phase
from .observables import Observable, PointVector, conj_terms, mul_terms, norm, sup_bound
from .reduction import fsum_array, fsum_complex
from .systems import ALL, CyclicShift, FiniteSystem, System, TorusSystem, check_on
from .traces import SeminormTrace, validate_schedule

log = logging.getLogger(__name__)

METHODS = ("recursive", "fourier-base", "cube-oracle")


class BudgetExceeded(RuntimeError):
    def __init__(self, estimate: float, budget: float, what: str):
        super().__init__(f"{what}: estimated work {estimate:.3g} exceeds the budget {budget:.3g}")
        self.estimate = estimate
        self.budget = budget


class _Clamps:
    def __init__(self):
        self.values: list[float] = []

    def clamp(self, x: float) -> float:
        if x < 0.0:
            self.values.append(-x)
            log.debug("clamped negative power sum %.3g to 0", x)
            return 0.0
        return x


# --------------------------------------------------------------------------
# finite systems


def _autocorr(sys: FiniteSystem, g: np.ndarray, count: int, fourier: bool) -> np.ndarray:
    """``c[n-1] = int T^n g conj(g)`` for ``n = 1..count``."""
    w = sys.space.w
    period = sys.period
    span = min(count, period)
    if fourier and isinstance(sys, CyclicShift):
        M = sys.n
        G = np.fft.fft(g)
        c_all = np.fft.ifft(np.abs(G) ** 2) / M
        c = c_all[np.arange(1, span + 1) % M]
    else:
        gc = np.conj(g) * w
        c = np.array([np.dot(sys.koopman_values(g, n), gc) for n in range(1, span + 1)])
    if count > span:
        c = c[(np.arange(count) % span)]
    return c


def _finite_powers(sys: FiniteSystem, g: np.ndarray, level: int, Ns: Sequence[int], fourier: bool,
                   clamps: _Clamps) -> list[float]:
    if level == 1:
        m = fsum_array(sys.space.w * g)
        return [abs(m) ** 2] * len(Ns)
    maxN = Ns[-1]
    if level == 2:
        c2 = np.abs(_autocorr(sys, g, maxN, fourier)) ** 2
        return [math.fsum(c2[:N].tolist()) / N for N in Ns]
    gc = np.conj(g)
    # Delta_n g depends on n mod the period, so one period of inner values suffices
    span = min(maxN, sys.period)
    per_n = [_finite_powers(sys, sys.koopman_values(g, n) * gc, level - 1, Ns, fourier, clamps)
             for n in range(1, span + 1)]
    return [clamps.clamp(math.fsum(per_n[j % span][i] for j in range(N)) / N) for i, N in enumerate(Ns)]


# --------------------------------------------------------------------------
# torus systems: fixed frequencies, vectorized


def _phase_matrix(sys: TorusSystem, qs: list[tuple], N: int) -> np.ndarray:
    """``E[n-1, i] = e(n q_i.alpha)`` from exact integer reductions."""
    al = sys.alphas
    out = np.empty((N, len(qs)), dtype=complex)
    ns = range(1, N + 1)
    for i, q in enumerate(qs):
        num, den = phase.frac_pair(q, al)
        if num == 0:
            out[:, i] = 1.0
            continue
        fr = np.array([((n * num) % den) / den for n in ns])
        fr[fr >= 0.5] -= 1.0
        out[:, i] = np.exp(2j * np.pi * fr)
    return out


class _KernelCache:
    """``Re S_N(dq.alpha) / N`` by key difference."""

    def __init__(self, sys: TorusSystem):
        self.sys = sys
        self.cache: dict = {}

    def value(self, dq: tuple, N: int) -> float:
        key = (dq, N)
        v = self.cache.get(key)
        if v is None:
            v = phase.geometric_sum(dq, self.sys.alphas, N).real / N
            self.cache[key] = v
        return v

    def matrix(self, qs: list[tuple], N: int) -> np.ndarray:
        K = np.empty((len(qs), len(qs)))
        for i, a in enumerate(qs):
            for j in range(i, len(qs)):
                b = qs[j]
                K[i, j] = K[j, i] = self.value(tuple(x - y for x, y in zip(a, b)), N)
        return K


def _group_by_phase(sys: TorusSystem, freqs) -> tuple[list[tuple], np.ndarray]:
    """Distinct linear phases and the 0/1 matrix sending frequencies to them."""
    qs: list = []
    index: dict = {}
    rows = []
    for v in freqs:
        q = tuple(sys.lin_phase(v))
        if q not in index:
            index[q] = len(qs)
            qs.append(q)
        rows.append(index[q])
    G = np.zeros((len(freqs), len(qs)))
    G[np.arange(len(freqs)), rows] = 1.0
    return qs, G


def _fixed_level2(sys, terms: dict, N: int, kern: _KernelCache, clamps: _Clamps) -> float:
    freqs = list(terms)
    qs, G = _group_by_phase(sys, freqs)
    b = (np.abs(np.array([terms[v] for v in freqs])) ** 2) @ G
    K = kern.matrix(qs, N)
    return clamps.clamp(float(b @ K @ b))


def _fixed_level3(sys, terms: dict, N: int, kern: _KernelCache, clamps: _Clamps) -> float:
    """``(1/N) sum_n P_2(Delta_n g)`` for ``n <= N``, vectorized over ``n``."""
    freqs = sorted(terms)
    c = np.array([terms[v] for v in freqs])
    qv = [tuple(sys.lin_phase(v)) for v in freqs]
    E = _phase_matrix(sys, qv, N)
    diffs: dict = {}
    m = len(freqs)
    W = []
    for i in range(m):
        for j in range(m):
            u = tuple(a - b for a, b in zip(freqs[i], freqs[j]))
            if u not in diffs:
                diffs[u] = len(diffs)
            W.append((i, diffs[u], np.conj(c[j])))
    Wm = np.zeros((m, len(diffs)), dtype=complex)
    for i, k, val in W:
        Wm[i, k] += val
    a = (E * c[None, :]) @ Wm
    us = list(diffs)
    qs, G = _group_by_phase(sys, us)
    B = (np.abs(a) ** 2) @ G
    K = kern.matrix(qs, N)
    per_n = np.einsum("ni,ij,nj->n", B, K, B)
    return clamps.clamp(math.fsum(per_n.tolist()) / N)


def _delta_fixed(sys, terms: dict, n: int) -> dict:
    out: dict = {}
    al = sys.alphas
    items = sorted(terms.items())
    for v, cv in items:
        z = cv * phase.e_dot(tuple(n * x for x in sys.lin_phase(v)), al)
        for w, cw in items:
            u = tuple(a - b for a, b in zip(v, w))
            out[u] = out.get(u, 0j) + z * cw.conjugate()
    return out


def _fixed_power(sys, terms: dict, level: int, N: int, kern: _KernelCache, clamps: _Clamps) -> float:
    if level == 1:
        return abs(terms.get((0,) * sys.dim, 0j)) ** 2
    if level == 2:
        return _fixed_level2(sys, terms, N, kern, clamps)
    if level == 3:
        return _fixed_level3(sys, terms, N, kern, clamps)
    vals = [_fixed_power(sys, _delta_fixed(sys, terms, n), level - 1, N, kern, clamps) for n in range(1, N + 1)]
    return clamps.clamp(math.fsum(vals) / N)


# --------------------------------------------------------------------------
# torus systems: general catalog path


def _level2_general(sys: TorusSystem, terms: dict, Ns: Sequence[int], kern: _KernelCache,
                    clamps: _Clamps) -> list[float]:
    """``(1/N) sum_{m<=N} |<T^m g, g>|^2`` for each N."""
    maxN = Ns[-1]
    items = sorted(terms.items())
    fixed_C: dict = {}
    sparse: dict = {}
    al = sys.alphas
    for v, cv in items:
        if sys.is_fixed(v):
            q = tuple(sys.lin_phase(v))
            fixed_C[q] = fixed_C.get(q, 0.0) + abs(cv) ** 2
    classes: dict = {}
    for v, cv in items:
        classes.setdefault(sys.orbit_key(v), []).append((v, cv))
    pairs = ((a, b) for cls in classes.values() for a in cls for b in cls)
    for (v, cv), (w, cw) in pairs:
        hits = sys.returns(v, w, maxN)
        if hits == ALL:
            # only a fixed frequency returns at every step
            assert v == w and sys.is_fixed(v)
            continue
        for m in hits:
            _, q = sys.image(v, m)
            sparse.setdefault(m, []).append(cv * cw.conjugate() * phase.e_dot(q, al))
    qs = list(fixed_C)
    Cs = np.array([fixed_C[q] for q in qs])
    out = []
    for N in Ns:
        total = float(Cs @ kern.matrix(qs, N) @ Cs) * N if qs else 0.0
        corr = []
        for m in sorted(sparse):
            if m > N:
                break
            g = fsum_complex([C * phase.e_dot(tuple(m * x for x in q), al) for q, C in zip(qs, Cs)])
            bb = fsum_complex(sparse[m])
            corr.append(abs(g + bb) ** 2 - abs(g) ** 2)
        out.append(clamps.clamp(math.fsum([total] + corr) / N))
    return out


def _torus_powers(sys: TorusSystem, terms: dict, level: int, Ns: Sequence[int], kern: _KernelCache,
                  clamps: _Clamps) -> list[float]:
    if level == 1:
        return [abs(terms.get((0,) * sys.dim, 0j)) ** 2] * len(Ns)
    if all(sys.is_fixed(v) for v in terms):
        return [_fixed_power(sys, terms, level, N, kern, clamps) for N in Ns]
    if level == 2:
        return _level2_general(sys, terms, Ns, kern, clamps)
    maxN = Ns[-1]
    gc = conj_terms(terms)
    inner = [[] for _ in Ns]
    for n, tn in enumerate(sys.orbit(terms, maxN), start=1):
        d = mul_terms(tn, gc, eps=0.0)
        vals = _torus_powers(sys, d, level - 1, [N for N in Ns if N >= n], kern, clamps)
        off = len(Ns) - len(vals)
        for i, v in enumerate(vals):
            inner[off + i].append(v)
    return [clamps.clamp(math.fsum(v) / N) for v, N in zip(inner, Ns)]


# --------------------------------------------------------------------------
# public API


def _estimate_work(sys: System, f: Observable, level: int, maxN: int) -> float:
    if level <= 2:
        return 0.0
    if sys.kind == "finite":
        M = sys.space.size
        return float(maxN) ** (level - 2) * M * max(1.0, math.log2(M))
    T = max(len(f._terms), 1)
    per = min(float(T) ** (2 ** (level - 1)), 1e300)
    return float(maxN) ** (level - 2) * per


def ghk_seminorm(sys: System, f: Observable, l: int, schedule: Sequence[int] | None = None,
                 method: str = "recursive", full_cycle: bool = False) -> SeminormTrace:
    """Finite-N truncation of ``||f||_{U_l}`` along the schedule.

    ``method="fourier-base"`` evaluates the level-2 correlations of a cyclic
    shift by FFT; ``"cube-oracle"`` runs the brute-force cube average (cyclic
    shifts only, full cycle). With ``full_cycle`` a finite system is averaged
    over exactly one period, which gives the exact seminorm.
    """
    check_on(sys, f)
    if l < 1:
        raise ValueError("order must be >= 1")
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    if full_cycle:
        if sys.kind != "finite":
            raise ValueError("full-cycle mode needs a finite system")
        sched = (sys.period,)
        policy = "full-cycle"
    else:
        if schedule is None:
            schedule = [2**j for j in range(8, 13)] if sys.kind == "torus" else [sys.period]
        sched = validate_schedule(schedule)
        policy = "same-N-all-levels"
    if method == "cube-oracle":
        if not (isinstance(sys, CyclicShift) and sched == (sys.n,)):
            raise ValueError("the cube oracle needs a cyclic shift in full-cycle mode")
        val = gowers_cube_oracle(f, l)
        return SeminormTrace(l, sched, [val], [val ** (2**l)], method, policy)
    cfg = config.current()
    est = _estimate_work(sys, f, l, sched[-1])
    if est > cfg.work_budget:
        raise BudgetExceeded(est, cfg.work_budget, f"U_{l} seminorm on {sys.ident}")
    clamps = _Clamps()
    if sys.kind == "finite":
        powers = _finite_powers(sys, np.asarray(f.values), l, sched, method == "fourier-base", clamps)
    else:
        powers = _torus_powers(sys, dict(f._terms), l, sched, _KernelCache(sys), clamps)
    powers = [clamps.clamp(p) for p in powers]
    values = [p ** (1.0 / 2**l) for p in powers]
    return SeminormTrace(l, sched, values, powers, method, policy, clamps.values)


def _as_zn(f) -> np.ndarray:
    if isinstance(f, PointVector):
        if not f.space.is_uniform:
            raise ValueError("the cube oracle needs uniform weights on Z_N")
        return np.asarray(f.values)
    return np.asarray(f, dtype=complex)


def gowers_cube_oracle(f, k: int, max_n: int = 32) -> float:
    """Brute-force ``||f||_{U^k(Z_N)}`` as an average over all cubes ``(x, h_1..h_k)``.

    Cost is ``O(N^{k+1} 2^k)``; `max_n` guards the size.
    """
    v = _as_zn(f)
    N = v.shape[0]
    if not 1 <= k <= 3:
        raise ValueError("cube oracle supports 1 <= k <= 3")
    if N > max_n:
        raise BudgetExceeded(float(N) ** (k + 1), float(max_n) ** (k + 1), "cube oracle")
    vc = np.conj(v)
    x = np.arange(N)
    omegas = list(itertools.product((0, 1), repeat=k))
    total = []
    # loop over h_1..h_{k-1}; h_k and x are vectorized
    hk = np.arange(N)[:, None]
    for head in itertools.product(range(N), repeat=k - 1):
        prod = np.ones((N, N), dtype=complex)
        for om in omegas:
            shift = sum(o * h for o, h in zip(om[:-1], head))
            idx = (x[None, :] + shift + om[-1] * hk) % N
            prod = prod * (vc[idx] if sum(om) % 2 else v[idx])
        total.append(fsum_array(prod))
    s = fsum_complex(total) / N ** (k + 1)
    return max(s.real, 0.0) ** (1.0 / 2**k)


def u2_fourier(f) -> float:
    """``||f||_{U^2(Z_N)}`` from ``sum |f_hat|^4`` with ``f_hat = fft(f)/N``."""
    v = _as_zn(f)
    fh = np.fft.fft(v) / v.shape[0]
    return math.fsum((np.abs(fh) ** 4).tolist()) ** 0.25


def bench_gowers(n: int = 64, repeat: int = 3, seed: int = 0) -> dict:
    """Wall time of recursive ``U^3`` with FFT base against the brute-force cube average."""
    z = CyclicShift(n)
    rng = np.random.default_rng(seed)
    f = PointVector(rng.normal(size=n) + 1j * rng.normal(size=n), z.space)
    t_rec, t_cube = math.inf, math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        v_rec = ghk_seminorm(z, f, 3, method="fourier-base", full_cycle=True).final
        t_rec = min(t_rec, time.perf_counter() - t0)
    for _ in range(max(1, repeat // 3)):
        t0 = time.perf_counter()
        v_cube = gowers_cube_oracle(f, 3, max_n=n)
        t_cube = min(t_cube, time.perf_counter() - t0)
    return {"N": n, "order": 3, "recursive_seconds": t_rec, "cube_seconds": t_cube,
            "speedup": t_cube / t_rec, "value_recursive": v_rec, "value_cube": v_cube,
            "abs_difference": abs(v_rec - v_cube)}


# --------------------------------------------------------------------------
# inequality checks


def p_exponent(l: int) -> float:
    return 2.0**l / (l + 1)


@dataclass
class CheckReport:
    system: str
    schedule: tuple[int, ...]
    tol: float
    checks: list[dict] = field(default_factory=list)

    @property
    def violations(self) -> list[dict]:
        return [c for c in self.checks if not c["ok"]]

    @property
    def passed(self) -> bool:
        return not self.violations


def seminorm_checks(sys: System, f: Observable, l_max: int = 3, schedule: Sequence[int] | None = None,
                    tol: float | None = None, full_cycle: bool = False, method: str = "recursive",
                    resolution: int | None = None) -> CheckReport:
    """Monotonicity in ``l``, the sup bound and the ``L^{p_l}`` bound at every N."""
    if tol is None:
        tol = 1e-10 if sys.kind == "finite" else 1e-6
    traces = [ghk_seminorm(sys, f, l, schedule, method=method, full_cycle=full_cycle)
              for l in range(1, l_max + 1)]
    sched = traces[0].schedule
    rep = CheckReport(sys.ident, sched, tol)
    sup = sup_bound(f)
    lp = {l: norm(f, p_exponent(l), resolution).value for l in range(1, l_max + 1)}
    for i, N in enumerate(sched):
        for l in range(1, l_max + 1):
            u = traces[l - 1].values[i]
            if l < l_max:
                u2 = traces[l].values[i]
                rep.checks.append({"N": N, "l": l, "check": "monotone", "lhs": u, "rhs": u2,
                                   "ok": u <= u2 + tol})
            rep.checks.append({"N": N, "l": l, "check": "sup", "lhs": u, "rhs": sup, "ok": u <= sup + tol})
            rep.checks.append({"N": N, "l": l, "check": f"L^{p_exponent(l):g}", "lhs": u, "rhs": lp[l],
                               "ok": u <= lp[l] + tol})
    return rep
