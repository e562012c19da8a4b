"""Certified dyadic enclosures for bulk evaluation of averaged sequences.

Exact Cesàro sums at r ~ 10^6 carry denominators near lcm(1..r), so bulk
scans work with integer bounds ``lo/2^B <= x <= hi/2^B`` held in numpy object
arrays (arbitrary precision ints).  Every operation rounds outward, so a
property certified on the enclosure holds for the exact value.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .rational import parse_fraction
from .transforms import PrefixTooShort, Transform, _Weights, transform_from_spec

SCALE_BITS = 64
DEFAULT_EPS = Fraction(1, 2**40)


def _obj(a) -> np.ndarray:
    return np.asarray(a).astype(object)


def _floordiv(a, b):
    return a // b


def _ceildiv(a, b):
    return -((-a) // b)


@dataclass(frozen=True)
class Enclosure:
    lo: np.ndarray
    hi: np.ndarray
    bits: int = SCALE_BITS

    @classmethod
    def from_ratios(cls, num, den, bits: int = SCALE_BITS) -> "Enclosure":
        scaled = _obj(num) * (1 << bits)
        den = _obj(den)
        return cls(_floordiv(scaled, den), _ceildiv(scaled, den), bits)

    @classmethod
    def constant(cls, value, length: int, bits: int = SCALE_BITS) -> "Enclosure":
        v = Fraction(value) * (1 << bits)
        lo = np.full(length, v.numerator // v.denominator, dtype=object)
        hi = np.full(length, -((-v.numerator) // v.denominator), dtype=object)
        return cls(lo, hi, bits)

    def __len__(self) -> int:
        return len(self.lo)

    @property
    def one(self) -> int:
        return 1 << self.bits

    def interval(self, r: int) -> tuple[Fraction, Fraction]:
        """Bounds at 1-based index ``r``."""
        return Fraction(int(self.lo[r - 1]), self.one), Fraction(int(self.hi[r - 1]), self.one)

    def midpoint(self, r: int) -> Fraction:
        return Fraction(int(self.lo[r - 1]) + int(self.hi[r - 1]), 2 * self.one)

    def width(self) -> Fraction:
        return Fraction(int(max(self.hi - self.lo, default=0)), self.one)

    def head(self, n: int) -> "Enclosure":
        return Enclosure(self.lo[:n], self.hi[:n], self.bits)

    def masked(self, keep: np.ndarray) -> "Enclosure":
        """Zero outside ``keep``."""
        zero = np.zeros(len(self), dtype=object)
        return Enclosure(np.where(keep, self.lo, zero), np.where(keep, self.hi, zero), self.bits)

    def __add__(self, other: "Enclosure") -> "Enclosure":
        if other.bits != self.bits:
            raise ValueError("scale mismatch")
        n = min(len(self), len(other))
        return Enclosure(self.lo[:n] + other.lo[:n], self.hi[:n] + other.hi[:n], self.bits)

    def scale(self, f) -> "Enclosure":
        f = Fraction(f)
        a, b = f.numerator, f.denominator
        if a >= 0:
            return Enclosure(_floordiv(self.lo * a, b), _ceildiv(self.hi * a, b), self.bits)
        return Enclosure(_floordiv(self.hi * a, b), _ceildiv(self.lo * a, b), self.bits)

    def abs_diff(self, value) -> "Enclosure":
        """Enclosure of ``|x - value|``."""
        v = Fraction(value) * self.one
        v_lo = v.numerator // v.denominator
        v_hi = -((-v.numerator) // v.denominator)
        d_lo = self.lo - v_hi
        d_hi = self.hi - v_lo
        zero = np.zeros(len(self), dtype=object)
        lo = np.where(d_lo > 0, d_lo, np.where(d_hi < 0, -d_hi, zero))
        hi = np.maximum(np.abs(d_lo), np.abs(d_hi))
        return Enclosure(lo, hi, self.bits)

    def certified_at_most(self, bound) -> np.ndarray:
        """Boolean array: the exact value is certainly ``<= bound``."""
        b = Fraction(bound)
        return self.hi * b.denominator <= b.numerator * self.one

    def certified_above(self, bound) -> np.ndarray:
        b = Fraction(bound)
        return self.lo * b.denominator > b.numerator * self.one

    def upper_max(self, start: int = 1, stop: int | None = None) -> Fraction:
        seg = self.hi[start - 1:stop]
        return Fraction(int(seg.max()), self.one) if len(seg) else Fraction(0)


def frequency_enclosures(counts: np.ndarray, bits: int = SCALE_BITS) -> list[Enclosure]:
    """Enclosures of ``Pi_l(n) = counts[l, n-1] / n``."""
    n = np.arange(1, counts.shape[1] + 1, dtype=np.int64)
    return [Enclosure.from_ratios(counts[ell], n, bits) for ell in range(counts.shape[0])]


def _cesaro(lo, hi):
    r = _obj(np.arange(1, len(lo) + 1, dtype=np.int64))
    return _floordiv(np.cumsum(lo), r), _ceildiv(np.cumsum(hi), r)


def _weighted(w_lo, w_hi, lo, hi):
    """Running weighted means with non-negative interval weights."""
    s_lo = np.cumsum(np.where(lo >= 0, w_lo * lo, w_hi * lo))
    s_hi = np.cumsum(np.where(hi >= 0, w_hi * hi, w_lo * hi))
    a_lo = np.cumsum(w_lo)
    a_hi = np.cumsum(w_hi)
    out_lo = np.where(s_lo >= 0, _floordiv(s_lo, a_hi), _floordiv(s_lo, a_lo))
    out_hi = np.where(s_hi >= 0, _ceildiv(s_hi, a_lo), _ceildiv(s_hi, a_hi))
    return out_lo, out_hi


def _weight_arrays(weights, r_max: int, bits: int):
    ws = _Weights(weights)
    n = np.arange(1, r_max + 1, dtype=np.int64)
    if ws.family == "1":
        ones = np.ones(r_max, dtype=object)
        return ones, ones
    if ws.family == "n":
        w = _obj(n)
        return w, w
    if ws.family == "1/n":
        one = _obj(np.full(r_max, 1, dtype=np.int64)) * (1 << bits)
        return _floordiv(one, _obj(n)), _ceildiv(one, _obj(n))
    import math

    d = math.lcm(*(v.denominator for v in ws.values))
    ints = [int(v * d) for v in ws.values]
    w = _obj(np.resize(np.array(ints, dtype=object), r_max))
    return w, w


def apply_certified(t: Transform, x: Enclosure, r_max: int, eps: Fraction = DEFAULT_EPS) -> Enclosure:
    """Enclosure of ``(T x)_r`` for ``r = 1..r_max``.

    Lower-triangular builtins use running sums.  Other transforms are
    evaluated row by row; infinite rows add the declared tail bound times
    the largest magnitude in ``x``.
    """
    kind = t.spec.get("kind") if t.spec else None
    if kind in {"identity", "cesaro", "holder", "weighted"} and len(x) < r_max:
        raise PrefixTooShort(f"need {r_max} values, have {len(x)}")
    lo, hi = x.lo[:r_max], x.hi[:r_max]
    if kind == "identity":
        return Enclosure(lo.copy(), hi.copy(), x.bits)
    if kind == "cesaro":
        return Enclosure(*_cesaro(lo, hi), x.bits)
    if kind == "holder":
        for _ in range(t.spec["k"]):
            lo, hi = _cesaro(lo, hi)
        return Enclosure(lo, hi, x.bits)
    if kind == "weighted":
        w_lo, w_hi = _weight_arrays(t.spec["weights"], r_max, x.bits)
        return Enclosure(*_weighted(w_lo, w_hi, lo, hi), x.bits)
    if kind == "scaled":
        inner = apply_certified(transform_from_spec(t.spec["of"]), x, r_max, eps)
        return inner.scale(parse_fraction(t.spec["factor"]))
    return _generic(t, x, r_max, eps)


def _generic(t: Transform, x: Enclosure, r_max: int, eps: Fraction) -> Enclosure:
    mag = max(int(np.max(np.abs(x.lo), initial=0)), int(np.max(np.abs(x.hi), initial=0)))
    out_lo = np.zeros(r_max, dtype=object)
    out_hi = np.zeros(r_max, dtype=object)
    for r in range(1, r_max + 1):
        pairs, tail = t.row(r, None if t.finite_rows else eps)
        end = t.row_end(r, None if t.finite_rows else eps)
        if pairs and end > len(x):
            raise PrefixTooShort(f"row {r} of {t.name} reads {end} values, have {len(x)}")
        s_lo = Fraction(0)
        s_hi = Fraction(0)
        for n, c in pairs:
            a, b = int(x.lo[n - 1]), int(x.hi[n - 1])
            if c > 0:
                s_lo += c * a
                s_hi += c * b
            else:
                s_lo += c * b
                s_hi += c * a
        slack = tail * mag
        s_lo -= slack
        s_hi += slack
        out_lo[r - 1] = s_lo.numerator // s_lo.denominator
        out_hi[r - 1] = -((-s_hi.numerator) // s_hi.denominator)
    return Enclosure(out_lo, out_hi, x.bits)


def averaged_frequency_enclosures(t: Transform, counts: np.ndarray, r_max: int,
                                  bits: int = SCALE_BITS) -> list[Enclosure]:
    return [apply_certified(t, f, r_max) for f in frequency_enclosures(counts, bits)]


def distance_enclosure(freqs: list[Enclosure], q) -> Enclosure:
    """Enclosure of ``||x - q||_1`` from per-coordinate enclosures."""
    total = None
    for enc, qv in zip(freqs, q):
        d = enc.abs_diff(qv)
        total = d if total is None else total + d
    return total
