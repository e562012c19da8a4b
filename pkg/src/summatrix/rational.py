"""Exact rational helpers shared by every module.

Large sums go through gmpy2 in a balanced tree so that the cost is dominated
by a few big multiplications instead of one gcd per term.
"""

from __future__ import annotations

from decimal import ROUND_HALF_EVEN, Decimal, localcontext
from fractions import Fraction
from typing import Iterable, Sequence

import gmpy2

Rational = Fraction


def parse_fraction(text) -> Fraction:
    """Parse ``"3/4"``, ``"2"`` or an int into a Fraction. Floats are refused."""
    if isinstance(text, bool):
        raise ValueError(f"not a rational: {text!r}")
    if isinstance(text, (int, Fraction)):
        return Fraction(text)
    if isinstance(text, dict):
        try:
            return Fraction(int(text["num"]), int(text["den"]))
        except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"bad rational object {text!r}") from exc
    if not isinstance(text, str):
        raise ValueError(f"not a rational: {text!r}")
    s = text.strip()
    if not s or any(c in s for c in ".eE"):
        raise ValueError(f"not an exact rational: {text!r}")
    try:
        return Fraction(s)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"not an exact rational: {text!r}") from exc


def fraction_str(x: Fraction) -> str:
    """Render as ``a/b`` (always with a slash, so CSV columns are uniform)."""
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def decimal_str(x: Fraction, places: int = 12) -> str:
    x = Fraction(x)
    with localcontext() as ctx:
        ctx.prec = places + 40
        d = Decimal(x.numerator) / Decimal(x.denominator)
        return str(d.quantize(Decimal(1).scaleb(-places), rounding=ROUND_HALF_EVEN))


def _tree(terms: Sequence, lo: int, hi: int):
    if hi - lo == 1:
        return terms[lo]
    mid = (lo + hi) // 2
    return _tree(terms, lo, mid) + _tree(terms, mid, hi)


def to_mpq(x) -> gmpy2.mpq:
    if isinstance(x, Fraction):
        return gmpy2.mpq(x.numerator, x.denominator)
    return gmpy2.mpq(x)


def from_mpq(x) -> Fraction:
    return Fraction(int(x.numerator), int(x.denominator))


def exact_sum(terms: Iterable) -> Fraction:
    """Exact sum of rationals (Fractions, ints or mpq) via a balanced tree."""
    items = [t if isinstance(t, gmpy2.mpq) else to_mpq(t) for t in terms]
    if not items:
        return Fraction(0)
    return from_mpq(_tree(items, 0, len(items)))


def exact_ratio_sum(numerators: Sequence[int], denominators: Sequence[int]) -> Fraction:
    """Exact value of sum(numerators[k] / denominators[k])."""
    if len(numerators) != len(denominators):
        raise ValueError("length mismatch")
    items = [gmpy2.mpq(int(a), int(b)) for a, b in zip(numerators, denominators)]
    if not items:
        return Fraction(0)
    return from_mpq(_tree(items, 0, len(items)))


def ceil_fraction(x: Fraction) -> int:
    return -((-x.numerator) // x.denominator)
