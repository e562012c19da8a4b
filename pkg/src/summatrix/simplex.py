"""Rational probability vectors, the target set, and digit blocks."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from .digits import check_base, periodic
from .rational import fraction_str, parse_fraction

Vector = tuple[Fraction, ...]


def check_probability_vector(v: Sequence) -> Vector:
    v = tuple(Fraction(x) for x in v)
    if len(v) < 2:
        raise ValueError("probability vectors need at least 2 coordinates")
    if any(x < 0 for x in v):
        raise ValueError(f"negative entry in {v}")
    if sum(v) != 1:
        raise ValueError(f"entries of {_fmt(v)} sum to {sum(v)}, not 1")
    return v


def _fmt(v) -> str:
    return "(" + ", ".join(str(Fraction(x)) for x in v) + ")"


def format_vector(v) -> str:
    return _fmt(v)


def l1_distance(a: Sequence, b: Sequence) -> Fraction:
    if len(a) != len(b):
        raise ValueError(f"dimension mismatch: {len(a)} vs {len(b)}")
    return sum((abs(Fraction(x) - Fraction(y)) for x, y in zip(a, b)), Fraction(0))


def is_excluded_corner(v: Sequence) -> bool:
    """True for (1, 0, ..., 0) and (0, ..., 0, 1), the two vectors left out of the target set."""
    return v[0] == 1 or v[-1] == 1


@dataclass(frozen=True)
class RationalTarget:
    """A rational probability vector other than the two excluded corners."""

    entries: Vector
    denominator: int

    @classmethod
    def of(cls, entries) -> "RationalTarget":
        v = check_probability_vector(entries)
        if is_excluded_corner(v):
            raise ValueError(f"{_fmt(v)} is an excluded corner")
        s = math.lcm(*(x.denominator for x in v))
        return cls(v, s)

    @property
    def base(self) -> int:
        return len(self.entries)

    @property
    def numerators(self) -> tuple[int, ...]:
        """Entries scaled by the common denominator (digit counts of the block)."""
        return tuple(int(x * self.denominator) for x in self.entries)

    def __str__(self) -> str:
        return _fmt(self.entries)

    def to_json(self) -> list[str]:
        return [fraction_str(x) for x in self.entries]


def as_target(q) -> RationalTarget:
    return q if isinstance(q, RationalTarget) else RationalTarget.of(q)


def parse_target(text: str) -> RationalTarget:
    """Parse ``"q=1/3,2/3"`` or ``"1/3,2/3"``."""
    s = text.strip()
    if s.startswith("q="):
        s = s[2:]
    parts = [p for p in s.split(",")]
    if len(parts) < 2:
        raise ValueError(f"target needs at least two entries: {text!r}")
    return RationalTarget.of(parse_fraction(p) for p in parts)


def parse_targets(text: str) -> list[RationalTarget]:
    """Semicolon-separated target list, e.g. ``"3/4,1/4;1/4,3/4"``."""
    return [parse_target(chunk) for chunk in text.split(";") if chunk.strip()]


def target_to_pairs(q: RationalTarget) -> list[dict]:
    return [{"num": x.numerator, "den": x.denominator} for x in q.entries]


def target_from_json(obj) -> RationalTarget:
    if isinstance(obj, dict) and "q" in obj:
        obj = obj["q"]
    if isinstance(obj, str):
        return parse_target(obj)
    if not isinstance(obj, list):
        raise ValueError(f"target must be a list of rationals, got {obj!r}")
    return RationalTarget.of(parse_fraction(x) for x in obj)


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    """Weak compositions of ``total`` into ``parts`` in lexicographic order."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def iter_targets(base: int, max_denominator: int) -> Iterator[RationalTarget]:
    base = check_base(base)
    if max_denominator < 1:
        raise ValueError("max_denominator must be >= 1")
    for s in range(1, max_denominator + 1):
        for comp in _compositions(s, base):
            if math.gcd(s, *comp) != 1:
                continue
            v = tuple(Fraction(c, s) for c in comp)
            if is_excluded_corner(v):
                continue
            yield RationalTarget(v, s)


def enumerate_targets(base: int, max_denominator: int) -> list[RationalTarget]:
    """All targets with common denominator <= ``max_denominator``.

    Ordered by denominator, then lexicographically by numerators.
    """
    return list(iter_targets(base, max_denominator))


def closest_target(p: Sequence, max_denominator: int) -> RationalTarget:
    best = None
    for q in iter_targets(len(p), max_denominator):
        d = l1_distance(p, q.entries)
        if best is None or d < best[0]:
            best = (d, q)
    if best is None:
        raise ValueError("no targets at this denominator")
    return best[1]


@dataclass(frozen=True)
class Block:
    """A digit word whose frequency vector equals its target exactly."""

    digits: tuple[int, ...]
    target: RationalTarget

    @property
    def s(self) -> int:
        return len(self.digits)

    @property
    def base(self) -> int:
        return self.target.base

    @property
    def counts(self) -> tuple[int, ...]:
        return self.target.numerators

    def stream(self):
        return periodic(self.digits, self.base)


def block_for(q) -> Block:
    q = as_target(q)
    digits = []
    for d, c in enumerate(q.numerators):
        digits.extend([d] * c)
    block = Block(tuple(digits), q)
    top = q.base - 1
    if all(d == 0 for d in digits) or all(d == top for d in digits):
        raise ValueError(f"block for {q} is constant 0 or N-1")
    return block


def distance_numerators(counts: np.ndarray, q: RationalTarget, start: int = 1) -> np.ndarray:
    """Integer array ``D`` with ``||Pi(n) - q||_1 = D / (s * n)``.

    ``counts`` has shape ``(N, L)`` with column ``k`` the counts at prefix
    length ``start + k``.
    """
    s = q.denominator
    n = np.arange(start, start + counts.shape[1], dtype=np.int64)
    out = np.zeros(counts.shape[1], dtype=np.int64)
    for ell, qn in enumerate(q.numerators):
        out += np.abs(counts[ell] * s - qn * n)
    return out
