"""Deterministic reductions.

Scalar sums go through :func:`math.fsum`, which is exactly rounded and hence
independent of summation order. Array sums use Neumaier compensation in a fixed
order. Work over an index range is cut into blocks whose boundaries depend only
on the range and the configured block length, never on the worker count, so a
run with eight threads produces the same bits as a run with one.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

from . import config

T = TypeVar("T")


def fsum_complex(values: Iterable[complex]) -> complex:
    re: list[float] = []
    im: list[float] = []
    for v in values:
        re.append(v.real)
        im.append(v.imag)
    return complex(math.fsum(re), math.fsum(im))


def fsum_array(a: np.ndarray) -> complex | float:
    """Exactly rounded sum of all entries of `a`."""
    a = np.asarray(a).ravel()
    if np.iscomplexobj(a):
        return complex(math.fsum(a.real.tolist()), math.fsum(a.imag.tolist()))
    return math.fsum(a.tolist())


class ArrayAccumulator:
    """Neumaier-compensated running sum of equally shaped arrays."""

    def __init__(self, shape, dtype=complex):
        self.total = np.zeros(shape, dtype=dtype)
        self.comp = np.zeros(shape, dtype=dtype)

    def add(self, x: np.ndarray) -> None:
        t = self.total + x
        big = np.abs(self.total) >= np.abs(x)
        self.comp += np.where(big, (self.total - t) + x, (x - t) + self.total)
        self.total = t

    def merge(self, other: "ArrayAccumulator") -> None:
        self.add(other.total)
        self.add(other.comp)

    def value(self) -> np.ndarray:
        return self.total + self.comp


def block_plan(stops: Sequence[int], start: int = 1, block: int | None = None) -> list[tuple[int, int]]:
    """Half-open blocks covering ``[start, max(stops)]`` that break at every stop.

    Each ``N`` in `stops` is the inclusive end of some block, so prefix results
    at the schedule points can be assembled from whole blocks.
    """
    block = block or config.current().block
    cuts = sorted(set(int(s) for s in stops))
    out: list[tuple[int, int]] = []
    lo = start
    for stop in cuts:
        while lo <= stop:
            hi = min(lo + block, stop + 1)
            out.append((lo, hi))
            lo = hi
    return out


def run_blocks(fn: Callable[[int, int], T], blocks: Sequence[tuple[int, int]],
               threads: int | None = None) -> list[T]:
    """Evaluate ``fn(lo, hi)`` for every block; results come back in block order."""
    threads = threads or config.current().threads
    if threads <= 1 or len(blocks) <= 1:
        return [fn(lo, hi) for lo, hi in blocks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda b: fn(*b), blocks))
