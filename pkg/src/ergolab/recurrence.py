"""Recurrence certificates, arithmetic progressions and the correspondence model.

A finite set ``C`` inside ``[1, M]`` is placed in ``Z_N`` with ``N = (k_max + 1) M``.
A progression of length at most ``k_max + 1`` that starts in ``[1, M]``, runs
inside ``Z_N`` and stays in ``C`` cannot wrap around, so progressions in the
cyclic model and in the integers match one for one. Runs of negative step are
the reverses of positive ones.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .averages import multi_average, recurrence_quantity
from .observables import Observable, PointVector, indicator, sup_bound
from .seminorms import ghk_seminorm
from .systems import CyclicShift, System, verify_system
from .traces import validate_schedule


@dataclass(frozen=True)
class IntegerSet:
    elements: tuple[int, ...]
    horizon: int

    def __post_init__(self):
        els = tuple(sorted(set(int(x) for x in self.elements)))
        if els and (els[0] < 1 or els[-1] > self.horizon):
            raise ValueError(f"elements must lie in [1, {self.horizon}]")
        object.__setattr__(self, "elements", els)

    @classmethod
    def of(cls, elements: Iterable[int], horizon: int | None = None) -> "IntegerSet":
        els = sorted(set(int(x) for x in elements))
        return cls(tuple(els), horizon if horizon is not None else (els[-1] if els else 1))

    def __len__(self):
        return len(self.elements)

    def mask(self) -> np.ndarray:
        """Boolean membership array indexed by ``0..M``."""
        m = np.zeros(self.horizon + 1, dtype=bool)
        m[list(self.elements)] = True
        return m


def parse_integer_set(spec: str, base_dir=None) -> IntegerSet:
    """``multiples:3:100``, ``random:density=0.2:M=200:seed=7``, ``squares:100``,
    ``range:1:10``, ``1,2,4``, or a file of newline-separated integers."""
    head, _, rest = spec.partition(":")
    if head == "multiples":
        d, M = (int(x) for x in rest.split(":"))
        return IntegerSet(tuple(range(d, M + 1, d)), M)
    if head == "squares":
        M = int(rest)
        return IntegerSet(tuple(i * i for i in range(1, math.isqrt(M) + 1)), M)
    if head == "range":
        a, b = (int(x) for x in rest.split(":"))
        return IntegerSet(tuple(range(a, b + 1)), b)
    if head == "random":
        opts = dict(p.split("=") for p in rest.split(":") if p)
        M = int(opts["M"])
        rng = np.random.default_rng(int(opts.get("seed", 0)))
        keep = rng.random(M) < float(opts["density"])
        return IntegerSet(tuple(int(i) + 1 for i in np.flatnonzero(keep)), M)
    if head == "file" or Path(base_dir or ".", spec).is_file():
        path = Path(base_dir or ".", rest if head == "file" else spec)
        nums = [int(t) for t in path.read_text().split()]
        return IntegerSet.of(nums)
    if all(t.strip().lstrip("-").isdigit() for t in spec.split(",")):
        return IntegerSet.of(int(t) for t in spec.split(","))
    raise ValueError(f"cannot parse integer set {spec!r}")


def ap_count(C: IntegerSet, k: int) -> int:
    """Number of pairs ``(a, n)``, ``n >= 1``, with ``a, a+n, ..., a+kn`` all in ``C``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    M = C.horizon
    m = C.mask()
    total = 0
    for n in range(1, M // k + 1):
        span = k * n
        ok = m[1:M + 1 - span].copy()
        for j in range(1, k + 1):
            ok &= m[1 + j * n:M + 1 - span + j * n]
        total += int(ok.sum())
    return total


def upper_density(C: IntegerSet, N: int) -> float:
    """``|C cap [1, N]| / N`` (the finite prefix whose limsup is the upper density)."""
    return sum(1 for x in C.elements if x <= N) / N


@dataclass
class CorrespondenceInstance:
    source: IntegerSet
    k_max: int
    N: int
    system: CyclicShift
    indicator: PointVector
    meta: dict = field(default_factory=dict)

    @property
    def measure(self) -> Fraction:
        return Fraction(len(self.source), self.N)


def build_correspondence(C: IntegerSet, k_max: int) -> CorrespondenceInstance:
    if not len(C):
        raise ValueError("the source set is empty")
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    N = (k_max + 1) * C.horizon
    sys = CyclicShift(N)
    ind = indicator([x % N for x in C.elements], sys.space)
    meta = {
        "wrap_free": True,
        "density_bound": "not preserved: mu(A) = |C|/N is below the upper density of C",
    }
    return CorrespondenceInstance(C, k_max, N, sys, ind, meta)


def intersection_counts(inst: CorrespondenceInstance, k: int) -> np.ndarray:
    """``cnt[n] = N mu(A cap phi^-n A cap ... cap phi^-kn A)`` for ``n = 0..N-1``."""
    N = inst.N
    a = inst.indicator.values.real > 0
    out = np.zeros(N, dtype=np.int64)
    x = np.arange(N)
    for n in range(N):
        ok = a.copy()
        for j in range(1, k + 1):
            ok &= a[(x + j * n) % N]
        out[n] = int(ok.sum())
    return out


def correspondence_verify(inst: CorrespondenceInstance, k: int) -> dict:
    """Check ``(exists n >= 1: mu(...) > 0)  <=>  ap_count(C, k) > 0``, both directions."""
    if not 1 <= k <= inst.k_max:
        raise ValueError(f"k must lie in [1, {inst.k_max}]")
    cnt = intersection_counts(inst, k)
    aps = ap_count(inst.source, k)
    positive = [int(n) for n in np.flatnonzero(cnt[1:]) + 1]
    lhs = bool(positive)
    rhs = aps > 0
    # every integer progression appears once with step n and once reversed
    counts_match = int(cnt[1:].sum()) == 2 * aps
    return {
        "k": k,
        "N": inst.N,
        "ap_count": aps,
        "positive_steps": positive,
        "measures": {n: str(Fraction(int(cnt[n]), inst.N)) for n in positive},
        "system_to_set": (not lhs) or rhs,
        "set_to_system": (not rhs) or lhs,
        "consistent": lhs == rhs,
        "counts_match": counts_match,
        "note": "finite model: certifies the biconditional for this set, not density statements",
    }


# --------------------------------------------------------------------------
# certificates


def mr_certificate(sys: System, f: Observable, k: int, schedule: Sequence[int] | None = None,
                   nonneg: bool = False) -> dict:
    """Finite-schedule multiple recurrence evidence for ``f >= 0``, ``f != 0``."""
    if isinstance(f, PointVector):
        if not np.any(f.values[f.space.w > 0] != 0):
            raise ValueError("f must be nonzero")
    elif not f._terms:
        raise ValueError("f must be nonzero")
    tr = recurrence_quantity(sys, f, k, schedule, nonneg=nonneg)
    proxy = tr.meta["liminf_proxy"]
    return {
        "system": sys.ident,
        "k": k,
        "schedule": list(tr.schedule),
        "values": list(tr.values),
        "running_inf": tr.meta["running_inf"],
        "liminf_proxy": proxy,
        "verdict": "positive on schedule" if proxy > 0 else "not positive on schedule",
        "note": "a finite schedule bounds early averages only; the liminf over all N is not certified",
    }


def recurrence_oracle(inst_or_sys: CyclicShift, points: Sequence[int], k: int, N: int) -> Fraction:
    """``(1/N) sum_{n<=N} mu(A cap phi^-n A cap ... cap phi^-kn A)`` by counting, for ``Z_M`` shifts."""
    M = inst_or_sys.n
    a = np.zeros(M, dtype=bool)
    a[list(points)] = True
    x = np.arange(M)
    total = 0
    for n in range(1, N + 1):
        ok = a.copy()
        for j in range(1, k + 1):
            ok &= a[(x + j * n) % M]
        total += int(ok.sum())
    return Fraction(total, M * N)


def default_slack(N: int) -> float:
    return 5.0 * N ** -0.25 + 1e-6


def gvn_harness(sys: System, fs: Sequence[Observable], schedule: Sequence[int] | None = None,
                slack=None, full_cycle: bool = False, attested: bool = False) -> dict:
    """``||(1/N) sum prod_j T^{jn} f_j||_2 <= min_j j ||f_j||_{U^k, N} + slack(N)`` along the schedule.

    Every ``f_j`` needs ``||f_j||_inf <= 1``: certified by the sup bound, or
    attested by the caller.
    """
    k = len(fs)
    bounds = [sup_bound(f) for f in fs]
    if not attested and any(b > 1.0 + 1e-12 for b in bounds):
        raise ValueError("sup-norm bound <= 1 is neither certified nor attested")
    if full_cycle:
        if sys.kind != "finite":
            raise ValueError("full-cycle mode needs a finite system")
        sched = (sys.period,)
        slack = 1e-6 if slack is None else slack
        policy = "full-cycle, slack 1e-6"
    else:
        sched = validate_schedule(schedule or ([2**j for j in range(6, 13)] if sys.kind == "torus" else [sys.period]))
        policy = "5*N^(-1/4)+1e-6" if slack is None else "custom"
        slack = default_slack if slack is None else slack
    lhs = multi_average(sys, list(fs), sched, output="norm").values
    semis = [ghk_seminorm(sys, f, k, sched).values for f in fs]
    rows = []
    for i, N in enumerate(sched):
        rhs = min((j + 1) * semis[j][i] for j in range(k))
        sl = slack(N) if callable(slack) else float(slack)
        margin = rhs + sl - lhs[i]
        rows.append({"N": N, "lhs": lhs[i], "rhs": rhs, "slack": sl, "margin": margin, "ok": margin >= 0})
    return {"system": sys.ident, "k": k, "slack_policy": policy, "sup_bounds": bounds, "rows": rows,
            "passed": all(r["ok"] for r in rows)}


def correspondence_system_check(inst: CorrespondenceInstance) -> bool:
    return verify_system(inst.system, samples=4).passed
