"""Run-wide numeric settings.

A single :class:`NumericConfig` is active at a time. Library functions read it
through :func:`current`; tests and the CLI swap it with :func:`override`.
"""
from __future__ import annotations

import contextlib
import dataclasses
import os
from dataclasses import dataclass

__all__ = ["NumericConfig", "current", "override", "default_threads"]


def default_threads() -> int:
    raw = os.environ.get("ERGOLAB_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@dataclass(frozen=True)
class NumericConfig:
    prune_eps: float = 1e-14
    quad_resolution: int = 4096
    threads: int = 1
    # fixed block length for chunked reductions; independent of `threads`
    block: int = 256
    # budget for the seminorm recursion, in elementary term operations
    work_budget: float = 2e9
    support_cap: int = 200_000
    # largest number of observables in a multiple average
    max_k: int = 5
    summation: str = "fsum-exact-rounding/fixed-blocks"

    def provenance(self) -> dict:
        d = dataclasses.asdict(self)
        # thread count never changes results, so it is not part of the record
        d.pop("threads")
        return d


_ACTIVE = NumericConfig(threads=default_threads())


def current() -> NumericConfig:
    return _ACTIVE


@contextlib.contextmanager
def override(**changes):
    global _ACTIVE
    saved = _ACTIVE
    _ACTIVE = dataclasses.replace(saved, **changes)
    try:
        yield _ACTIVE
    finally:
        _ACTIVE = saved
