"""Finite-N traces returned by the averaging and seminorm routines."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence


def validate_schedule(schedule: Sequence[int]) -> tuple[int, ...]:
    sched = tuple(int(n) for n in schedule)
    if not sched:
        raise ValueError("schedule: must be nonempty")
    if sched[0] < 1:
        raise ValueError("schedule: entries must be >= 1")
    if any(b <= a for a, b in zip(sched, sched[1:])):
        raise ValueError(f"schedule: must be strictly increasing, got {list(sched)}")
    return sched


def tail_gap(series: Sequence[float]) -> float:
    """Largest jump between consecutive values over the last half of the schedule."""
    if len(series) < 2:
        return 0.0
    start = max(0, len(series) // 2 - 1) if len(series) > 2 else 0
    tail = series[start:]
    return max(abs(b - a) for a, b in zip(tail, tail[1:]))


@dataclass
class AverageTrace:
    schedule: tuple[int, ...]
    values: list
    norms: list[float] | None = None
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def scalars(self) -> list[float]:
        if self.norms is not None:
            return list(self.norms)
        return [abs(v) if isinstance(v, complex) else float(v) for v in self.values]

    @property
    def diagnostic(self) -> float:
        return tail_gap(self.scalars)

    @property
    def final(self):
        return self.values[-1]


@dataclass
class SeminormTrace:
    order: int
    schedule: tuple[int, ...]
    values: list[float]
    powers: list[float]
    method: str
    policy: str
    clamped: list[float] = field(default_factory=list)

    @property
    def final(self) -> float:
        return self.values[-1]
