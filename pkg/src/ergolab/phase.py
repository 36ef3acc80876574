"""Exact phase bookkeeping.

A rotation number is stored as the binary fraction ``num / 2**e`` that its
double-precision value denotes. Integer multiples are reduced modulo one in
integer arithmetic, so ``e(q * alpha)`` carries no drift however large ``q``
grows; only the final cosine/sine pair is rounded.
"""
from __future__ import annotations

import cmath
import math
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

TWO_PI = 2.0 * math.pi


@lru_cache(maxsize=None)
def _ratio(alpha: float) -> tuple[int, int]:
    num, den = Fraction(alpha).as_integer_ratio()
    return num, den


def frac_pair(qs: Sequence[int], alphas: Sequence[float]) -> tuple[int, int]:
    """``q . alpha mod 1`` as ``(num, den)`` with ``0 <= num < den``."""
    acc, den_acc = 0, 1
    for q, a in zip(qs, alphas):
        if not q:
            continue
        num, den = _ratio(a)
        r = (q * num) % den
        # denominators are powers of two, so one always divides the other
        if den > den_acc:
            acc *= den // den_acc
            den_acc = den
            acc += r
        else:
            acc += r * (den_acc // den)
    return acc % den_acc, den_acc


def frac_dot(qs: Sequence[int], alphas: Sequence[float]) -> Fraction:
    num, den = frac_pair(qs, alphas)
    return Fraction(num, den)


def _e_pair(num: int, den: int) -> complex:
    if num == 0:
        return 1.0 + 0.0j
    if 2 * num >= den:
        num -= den
    return cmath.exp(1j * TWO_PI * (num / den))


def e(x: float | Fraction) -> complex:
    """``exp(2 pi i x)`` evaluated after reduction to [-1/2, 1/2]."""
    if isinstance(x, Fraction):
        return _e_pair(x.numerator % x.denominator, x.denominator)
    x = float(x)
    x -= round(x)
    return cmath.exp(1j * TWO_PI * x)


def e_dot(qs: Sequence[int], alphas: Sequence[float]) -> complex:
    return _e_pair(*frac_pair(qs, alphas))


def is_integer_dot(qs: Sequence[int], alphas: Sequence[float]) -> bool:
    return frac_pair(qs, alphas)[0] == 0


def geometric_sum(qs: Sequence[int], alphas: Sequence[float], n: int) -> complex:
    """``sum_{m=1}^{n} e(m * q.alpha)`` in closed form."""
    num, den = frac_pair(qs, alphas)
    if num == 0:
        return complex(n)
    z = _e_pair(num, den)
    zn = _e_pair((num * n) % den, den)
    return z * (1.0 - zn) / (1.0 - z)
