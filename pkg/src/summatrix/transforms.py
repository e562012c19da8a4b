"""Summability matrices ``[c_{m,n}]`` given as exact coefficient generators.

Rows are either finite (``last_index(m)``) or infinite with a tail-bound
contract ``tail_bound(m, eps) -> M`` such that ``sum_{n >= M} |c_{m,n}| <= eps``.
Builtin kinds carry a JSON ``spec`` which the bulk evaluators dispatch on.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import gmpy2
import numpy as np

from .digits import DigitStream
from .rational import exact_sum, fraction_str, from_mpq, parse_fraction


class ContractBreach(ValueError):
    """A transform violated its own declared support or tail-bound contract."""


class PrefixTooShort(ValueError):
    """The supplied sequence prefix does not cover the row support."""


class SpecError(ValueError):
    """Malformed transform description; the message names the field."""


def _one(m: int) -> int:
    return 1


@dataclass(frozen=True, eq=False)
class Transform:
    name: str
    coefficient: Callable[[int, int], Fraction]
    row_bound: Fraction
    last_index: Callable[[int], int] | None = None
    tail_bound: Callable[[int, Fraction], int] | None = None
    first_index: Callable[[int], int] = _one
    nonnegative: bool = False
    lower_triangular: bool = False
    # exact limit of column n as m -> infinity, when it is known in closed form
    column_limit: Callable[[int], Fraction] | None = None
    # index from which |c_{m,n}| is non-increasing in m, when certified
    monotone_from: Callable[[int], int | None] | None = None
    spec: dict | None = None
    _abs: "Transform | None" = field(default=None, repr=False)

    def __post_init__(self):
        if (self.last_index is None) == (self.tail_bound is None):
            raise ValueError("give exactly one of last_index (finite rows) or tail_bound (infinite rows)")
        object.__setattr__(self, "row_bound", Fraction(self.row_bound))

    @property
    def finite_rows(self) -> bool:
        return self.last_index is not None

    @property
    def uniform_bound(self) -> int:
        """Integer M with every absolute row sum at most M."""
        return max(1, -((-self.row_bound.numerator) // self.row_bound.denominator))

    def c(self, m: int, n: int) -> Fraction:
        if m < 1 or n < 1:
            raise ValueError("indices start at 1")
        return Fraction(self.coefficient(m, n))

    def row_end(self, m: int, eps: Fraction | None = None) -> int:
        """Largest column index read when evaluating row ``m``."""
        if self.finite_rows:
            return self.last_index(m)
        if eps is None or eps <= 0:
            raise ValueError(f"{self.name}: infinite rows need a positive eps")
        return self.tail_bound(m, Fraction(eps)) - 1

    def row(self, m: int, eps: Fraction | None = None) -> tuple[list[tuple[int, Fraction]], Fraction]:
        """Non-zero entries of row ``m`` over the covered support, plus the
        declared bound on the uncovered absolute tail (0 for finite rows)."""
        start = self.first_index(m)
        end = self.row_end(m, eps)
        pairs = []
        for n in range(max(1, start), end + 1):
            v = self.c(m, n)
            if v:
                pairs.append((n, v))
        return pairs, (Fraction(0) if self.finite_rows else Fraction(eps))

    def absolute(self) -> "Transform":
        """The matrix ``[|c_{m,n}|]``."""
        if self.nonnegative:
            return self
        if self._abs is None:
            spec = None
            if self.spec and self.spec.get("kind") == "scaled":
                spec = dict(self.spec, factor=fraction_str(abs(parse_fraction(self.spec["factor"]))))
            coef = self.coefficient
            t = Transform(
                name=f"|{self.name}|",
                coefficient=lambda m, n: abs(Fraction(coef(m, n))),
                row_bound=self.row_bound,
                last_index=self.last_index,
                tail_bound=self.tail_bound,
                first_index=self.first_index,
                nonnegative=True,
                lower_triangular=self.lower_triangular,
                column_limit=(lambda n: abs(self.column_limit(n))) if self.column_limit else None,
                monotone_from=self.monotone_from,
                spec=spec,
            )
            object.__setattr__(self, "_abs", t)
        return self._abs

    def to_spec(self) -> dict:
        if self.spec is None:
            raise SpecError(f"{self.name} has no JSON description")
        return dict(self.spec)


# -- builtins ---------------------------------------------------------------


def identity() -> Transform:
    return Transform(
        name="identity",
        coefficient=lambda m, n: Fraction(1) if m == n else Fraction(0),
        row_bound=Fraction(1),
        last_index=lambda m: m,
        first_index=lambda m: m,
        nonnegative=True,
        lower_triangular=True,
        monotone_from=lambda n: n,
        spec={"kind": "identity"},
    )


def cesaro() -> Transform:
    return Transform(
        name="cesaro",
        coefficient=lambda m, n: Fraction(1, m) if n <= m else Fraction(0),
        row_bound=Fraction(1),
        last_index=lambda m: m,
        nonnegative=True,
        lower_triangular=True,
        monotone_from=lambda n: n,
        spec={"kind": "cesaro"},
    )


class _HolderTable:
    """Memoized Hölder coefficients.

    Column ``n`` of the k-fold Cesàro product is the running mean of column
    ``n`` of the (k-1)-fold product, so columns are extended incrementally.
    Order 2 uses the closed form ``(H_m - H_{n-1}) / m``.
    """

    def __init__(self):
        self._lock = threading.RLock()
        self._harmonic = [Fraction(0)]
        self._cols: dict[tuple[int, int], list] = {}
        self._mono: dict[tuple[int, int], int] = {}

    def harmonic(self, m: int) -> Fraction:
        h = self._harmonic
        if m >= len(h):
            with self._lock:
                while len(h) <= m:
                    h.append(h[-1] + Fraction(1, len(h)))
        return h[m]

    def coefficient(self, k: int, m: int, n: int) -> Fraction:
        if n > m:
            return Fraction(0)
        if k == 1:
            return Fraction(1, m)
        if k == 2:
            return (self.harmonic(m) - self.harmonic(n - 1)) / m
        with self._lock:
            entry = self._cols.setdefault((k, n), [[], Fraction(0)])
            vals = entry[0]
            while n + len(vals) <= m:
                mm = n + len(vals)
                entry[1] += self.coefficient(k - 1, mm, n)
                vals.append(entry[1] / mm)
            return vals[m - n]

    def monotone_from(self, k: int, n: int) -> int:
        if k == 1:
            return n
        key = (k, n)
        if key not in self._mono:
            m = max(n, self.monotone_from(k - 1, n))
            # a running mean stops increasing once the next input is <= the mean
            while self.coefficient(k - 1, m + 1, n) > self.coefficient(k, m, n):
                m += 1
            self._mono[key] = m
        return self._mono[key]


_HOLDER = _HolderTable()


def holder(k: int) -> Transform:
    if isinstance(k, bool) or not isinstance(k, int) or k < 1:
        raise SpecError(f"holder: 'k' must be an integer >= 1, got {k!r}")
    return Transform(
        name=f"holder({k})",
        coefficient=lambda m, n: _HOLDER.coefficient(k, m, n),
        row_bound=Fraction(1),
        last_index=lambda m: m,
        nonnegative=True,
        lower_triangular=True,
        monotone_from=lambda n: _HOLDER.monotone_from(k, n),
        spec={"kind": "holder", "k": k},
    )


class _Weights:
    FAMILIES = ("1", "n", "1/n")

    def __init__(self, weights):
        self._lock = threading.Lock()
        if isinstance(weights, str):
            if weights not in self.FAMILIES:
                raise SpecError(f"weighted: 'weights' family must be one of {self.FAMILIES}, got {weights!r}")
            self.family = weights
            self.values = None
        else:
            try:
                vals = [parse_fraction(w) for w in weights]
            except (TypeError, ValueError) as exc:
                raise SpecError(f"weighted: 'weights' entries must be exact rationals ({exc})") from exc
            if not vals or any(v <= 0 for v in vals):
                raise SpecError("weighted: 'weights' must be a non-empty list of positive rationals")
            self.family = None
            self.values = vals
        self._cum = [Fraction(0)]

    def w(self, n: int) -> Fraction:
        if self.family == "1":
            return Fraction(1)
        if self.family == "n":
            return Fraction(n)
        if self.family == "1/n":
            return Fraction(1, n)
        return self.values[(n - 1) % len(self.values)]

    def total(self, m: int) -> Fraction:
        if self.family == "1":
            return Fraction(m)
        if self.family == "n":
            return Fraction(m * (m + 1), 2)
        cum = self._cum
        if m >= len(cum):
            with self._lock:
                while len(cum) <= m:
                    cum.append(cum[-1] + self.w(len(cum)))
        return cum[m]

    def spec_value(self):
        return self.family if self.family else [fraction_str(v) for v in self.values]


def weighted(weights) -> Transform:
    """Weighted means ``c_{m,n} = w_n / (w_1 + ... + w_m)`` for ``n <= m``.

    ``weights`` is a family name (``"1"``, ``"n"``, ``"1/n"``) or a list of
    positive rationals repeated periodically.
    """
    ws = _Weights(weights)
    return Transform(
        name=f"weighted({ws.spec_value()})",
        coefficient=lambda m, n: ws.w(n) / ws.total(m) if n <= m else Fraction(0),
        row_bound=Fraction(1),
        last_index=lambda m: m,
        nonnegative=True,
        lower_triangular=True,
        monotone_from=lambda n: n,
        spec={"kind": "weighted", "weights": ws.spec_value()},
    )


def scaled(factor, base: Transform) -> Transform:
    f = parse_fraction(factor)
    bc = base.coefficient
    return Transform(
        name=f"{f}*{base.name}",
        coefficient=lambda m, n: f * Fraction(bc(m, n)),
        row_bound=abs(f) * base.row_bound,
        last_index=base.last_index,
        tail_bound=(lambda m, eps: base.tail_bound(m, eps / abs(f))) if base.tail_bound and f else base.tail_bound,
        first_index=base.first_index,
        nonnegative=base.nonnegative and f >= 0,
        lower_triangular=base.lower_triangular,
        column_limit=(lambda n: f * base.column_limit(n)) if base.column_limit else None,
        monotone_from=base.monotone_from,
        spec={"kind": "scaled", "factor": fraction_str(f), "of": base.spec} if base.spec else None,
    )


def matrix(rows: Sequence[Sequence], repeat_last: bool = False) -> Transform:
    """Explicit finite rows; past the listed rows, either zero rows or the
    last row repeated forever."""
    try:
        table = [[parse_fraction(x) for x in row] for row in rows]
    except (TypeError, ValueError) as exc:
        raise SpecError(f"matrix: 'rows' must hold exact rationals ({exc})") from exc
    if not table:
        raise SpecError("matrix: 'rows' must be non-empty")
    height = len(table)

    def row_of(m: int):
        if m <= height:
            return table[m - 1]
        return table[-1] if repeat_last else []

    def coef(m: int, n: int) -> Fraction:
        r = row_of(m)
        return r[n - 1] if n <= len(r) else Fraction(0)

    def limit(n: int) -> Fraction:
        if not repeat_last:
            return Fraction(0)
        last = table[-1]
        return last[n - 1] if n <= len(last) else Fraction(0)

    bound = max((sum((abs(x) for x in r), Fraction(0)) for r in table), default=Fraction(0))
    return Transform(
        name="matrix",
        coefficient=coef,
        row_bound=bound,
        last_index=lambda m: max(len(row_of(m)), 1),
        nonnegative=all(x >= 0 for r in table for x in r),
        lower_triangular=all(len(r) <= i + 1 for i, r in enumerate(table)) and len(table[-1]) <= height,
        column_limit=limit,
        monotone_from=lambda n: height + 1,
        spec={"kind": "matrix", "rows": [[fraction_str(x) for x in r] for r in table],
              "repeat_last": bool(repeat_last)},
    )


def builtin_transform(kind: str, **params) -> Transform:
    spec = {"kind": kind, **params}
    return transform_from_spec(spec)


def transform_from_spec(spec) -> Transform:
    if not isinstance(spec, dict):
        raise SpecError("transform spec must be a JSON object")
    kind = spec.get("kind")
    if kind == "identity":
        return identity()
    if kind == "cesaro":
        return cesaro()
    if kind == "holder":
        if "k" not in spec:
            raise SpecError("holder: missing field 'k'")
        return holder(spec["k"])
    if kind == "weighted":
        if "weights" not in spec:
            raise SpecError("weighted: missing field 'weights'")
        return weighted(spec["weights"])
    if kind == "scaled":
        if "factor" not in spec:
            raise SpecError("scaled: missing field 'factor'")
        if "of" not in spec:
            raise SpecError("scaled: missing field 'of'")
        try:
            factor = parse_fraction(spec["factor"])
        except ValueError as exc:
            raise SpecError(f"scaled: field 'factor' is not an exact rational ({exc})") from exc
        return scaled(factor, transform_from_spec(spec["of"]))
    if kind == "matrix":
        if "rows" not in spec or not isinstance(spec["rows"], list):
            raise SpecError("matrix: field 'rows' must be a list of rows")
        return matrix(spec["rows"], bool(spec.get("repeat_last", False)))
    raise SpecError(f"field 'kind': unknown transform kind {kind!r}")


# -- exact application -----------------------------------------------------


@dataclass(frozen=True)
class AveragedValue:
    value: Fraction
    truncation_error_bound: Fraction


@dataclass(frozen=True)
class AveragedFrequency:
    entries: tuple[Fraction, ...]
    truncation_error_bound: Fraction

    @property
    def in_simplex(self) -> bool:
        return all(x >= 0 for x in self.entries) and sum(self.entries) == 1


def apply_transform(t: Transform, s: Sequence, m: int, eps: Fraction | None = None,
                    bound=1) -> AveragedValue:
    """Exact ``sum_n c_{m,n} s_n`` over the covered support of row ``m``.

    ``s[0]`` is ``s_1``.  For infinite rows the result is within
    ``bound * eps`` of the full series.
    """
    bound = Fraction(bound)
    pairs, tail = t.row(m, eps)
    end = t.row_end(m, eps)
    if len(s) < end:
        raise PrefixTooShort(f"row {m} of {t.name} reads s_1..s_{end}, prefix has {len(s)}")
    terms = []
    for n, c in pairs:
        v = Fraction(s[n - 1])
        if abs(v) > bound:
            raise ValueError(f"|s_{n}| = {abs(v)} exceeds the declared bound {bound}")
        terms.append(c * v)
    return AveragedValue(exact_sum(terms), bound * tail)


def averaged_freq(t: Transform, stream: DigitStream, m: int, eps: Fraction | None = None) -> AveragedFrequency:
    """The T-averaged frequency vector at row ``m``, by exact summation."""
    pairs, tail = t.row(m, eps)
    base = stream.base
    if not pairs:
        return AveragedFrequency(tuple(Fraction(0) for _ in range(base)), tail)
    if len(pairs) == 1:
        n, c = pairs[0]
        a, b = c.numerator, c.denominator * n
        return AveragedFrequency(tuple(Fraction(a * k, b) for k in stream.counts(n)), tail)
    if len(pairs) <= 8:
        entries = [Fraction(0)] * base
        for n, c in pairs:
            counts = stream.counts(n)
            for ell in range(base):
                if counts[ell]:
                    entries[ell] += Fraction(c.numerator * counts[ell], c.denominator * n)
        return AveragedFrequency(tuple(entries), tail)
    last = pairs[-1][0]
    counts = stream.counts_array(last)
    idx = np.fromiter((n for n, _ in pairs), dtype=np.int64, count=len(pairs))
    cnum = [c.numerator for _, c in pairs]
    cden = [c.denominator * n for n, c in pairs]
    entries = []
    for ell in range(base):
        col = counts[ell, idx - 1].tolist()
        terms = [gmpy2.mpq(a * k, b) for a, k, b in zip(cnum, col, cden) if k]
        entries.append(exact_sum(terms))
    return AveragedFrequency(tuple(entries), tail)


_CUMULATIVE = {"identity", "cesaro", "holder", "weighted"}


@dataclass(frozen=True)
class FrequencyTable:
    """Exact averaged frequencies for ``m = 1..len``: entry ``(l, m)`` is
    ``num[l, m-1] / den[m-1]`` (not reduced)."""

    num: np.ndarray
    den: np.ndarray

    def __len__(self) -> int:
        return len(self.den)

    def entries(self, m: int) -> tuple[Fraction, ...]:
        d = int(self.den[m - 1])
        return tuple(Fraction(int(a), d) for a in self.num[:, m - 1])

    def sums_to_one(self) -> np.ndarray:
        return self.num.sum(axis=0) == self.den

    def nonnegative(self) -> np.ndarray:
        return (self.num >= 0).all(axis=0)


def averaged_freq_table(t: Transform, stream: DigitStream, m_max: int) -> FrequencyTable:
    """:func:`averaged_freq` for every ``m <= m_max`` at once.

    Identity, Cesàro and Hölder rows are built from running sums over the
    common denominator ``lcm(1..m_max)``; other finite-row transforms go row
    by row.
    """
    counts = stream.counts_array(m_max)
    kind = t.spec.get("kind") if t.spec else None
    n = np.arange(1, m_max + 1, dtype=np.int64)
    if kind == "identity":
        return FrequencyTable(counts.astype(object), n.astype(object))
    if kind in ("cesaro", "holder"):
        L = math.lcm(*range(1, m_max + 1))
        share = np.array([L // k for k in range(1, m_max + 1)], dtype=object)
        num = counts.astype(object) * share  # Pi(n) * L
        scale = L
        for _ in range(t.spec.get("k", 1)):
            num = np.cumsum(num, axis=1) * share  # mean over n <= m, scaled by L again
            scale *= L
        return FrequencyTable(num, np.full(m_max, scale, dtype=object))
    if not t.finite_rows:
        raise ValueError("averaged_freq_table needs finite rows")
    rows = [averaged_freq(t, stream, m).entries for m in range(1, m_max + 1)]
    dens = [math.lcm(*(x.denominator for x in row)) for row in rows]
    num = np.array([[x.numerator * (d // x.denominator) for x in row] for row, d in zip(rows, dens)],
                   dtype=object).T
    return FrequencyTable(num, np.array(dens, dtype=object))


def exact_apply_all(t: Transform, values: Sequence[Fraction], r_max: int) -> list[Fraction]:
    """Exact ``(T s)_r`` for every ``r <= r_max``.

    Cumulative kinds use running sums; anything else is evaluated row by row
    (finite rows only).
    """
    vals = [Fraction(v) for v in values]
    kind = t.spec.get("kind") if t.spec else None
    if kind in _CUMULATIVE and len(vals) < r_max:
        raise PrefixTooShort(f"need {r_max} values, have {len(vals)}")
    if kind == "identity":
        return vals[:r_max]
    if kind == "cesaro":
        return _exact_cesaro(vals[:r_max])
    if kind == "holder":
        out = vals[:r_max]
        for _ in range(t.spec["k"]):
            out = _exact_cesaro(out)
        return out
    if kind == "weighted":
        ws = _Weights(t.spec["weights"])
        out, acc = [], Fraction(0)
        for n in range(1, r_max + 1):
            acc += ws.w(n) * vals[n - 1]
            out.append(acc / ws.total(n))
        return out
    if kind == "scaled":
        f = parse_fraction(t.spec["factor"])
        inner = transform_from_spec(t.spec["of"])
        return [f * v for v in exact_apply_all(inner, vals, r_max)]
    if not t.finite_rows:
        raise ValueError("exact bulk application needs finite rows")
    return [apply_transform(t, vals, r, bound=max((abs(v) for v in vals), default=1) or 1).value
            for r in range(1, r_max + 1)]


def _exact_cesaro(vals: list[Fraction]) -> list[Fraction]:
    out, acc = [], Fraction(0)
    for n, v in enumerate(vals, start=1):
        acc += v
        out.append(acc / n)
    return out


# -- Silverman-Toeplitz audit ----------------------------------------------


@dataclass
class ConditionResult:
    status: str  # "pass" | "fail" | "inconclusive"
    exact: bool
    evidence: str
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"status": self.status, "exact": self.exact, "evidence": self.evidence,
                "details": self.details}


@dataclass
class AuditReport:
    transform: str
    m_horizon: int
    n_horizon: int
    h: int
    condition1: ConditionResult
    condition2: ConditionResult
    condition3: ConditionResult

    @property
    def conditions(self) -> tuple[ConditionResult, ConditionResult, ConditionResult]:
        return (self.condition1, self.condition2, self.condition3)

    @property
    def failed(self) -> bool:
        return any(c.status == "fail" for c in self.conditions)

    def summary(self) -> str:
        parts = []
        passed = [str(i) for i, c in enumerate(self.conditions, 1) if c.status == "pass"]
        if passed:
            exact = all(self.conditions[int(i) - 1].exact for i in passed)
            label = "conditions" if len(passed) > 1 else "condition"
            parts.append(f"{label} {','.join(passed)} pass" + (" (exact)" if exact else " (evidence at horizon)"))
        for i, c in enumerate(self.conditions, 1):
            if c.status == "fail":
                parts.append(f"condition {i} FAIL")
            elif c.status == "inconclusive":
                parts.append(f"condition {i} evidence at horizon")
        return "; ".join(parts)

    def to_json(self) -> dict:
        return {
            "transform": self.transform,
            "m_horizon": self.m_horizon,
            "n_horizon": self.n_horizon,
            "h": self.h,
            "condition1": self.condition1.to_json(),
            "condition2": self.condition2.to_json(),
            "condition3": self.condition3.to_json(),
            "summary": self.summary(),
        }


AUDIT_EPS = Fraction(1, 10**6)


def check_contract(t: Transform, rows: Sequence[int]) -> None:
    """Spot-check the declared support / tail-bound contract on ``rows``."""
    for m in rows:
        if t.finite_rows:
            last = t.last_index(m)
            for n in range(last + 1, last + 5):
                if t.c(m, n) != 0:
                    raise ContractBreach(f"{t.name}: c_{{{m},{n}}} = {t.c(m, n)} beyond last_index {last}")
            first = t.first_index(m)
            for n in range(max(1, first - 3), first):
                if t.c(m, n) != 0:
                    raise ContractBreach(f"{t.name}: c_{{{m},{n}}} non-zero before first_index {first}")
        else:
            for eps in (Fraction(1, 10), Fraction(1, 100), Fraction(1, 1000)):
                start = t.tail_bound(m, eps)
                stop = start + 4 * start + 64
                partial = sum((abs(t.c(m, n)) for n in range(start, stop)), Fraction(0))
                if partial > eps:
                    raise ContractBreach(
                        f"{t.name}: row {m}: sum_{{n={start}}}^{{{stop - 1}}} |c| = {partial} > eps = {eps}")


def _abs_row_sums(t: Transform, m_max: int) -> tuple[list[Fraction], bool]:
    """Absolute row sums for m <= m_max and whether they are exact."""
    kind = t.spec.get("kind") if t.spec else None
    if t.nonnegative and kind in _CUMULATIVE | {"scaled"}:
        sums = exact_apply_all(t, [Fraction(1)] * m_max, m_max)
        for m in sorted({1, 2, max(1, m_max // 2), m_max}):
            pairs, _ = t.row(m)
            brute = exact_sum(abs(c) for _, c in pairs)
            if brute != sums[m - 1]:
                raise ContractBreach(f"{t.name}: row {m} sums to {brute}, structural value {sums[m - 1]}")
        return sums, True
    out = []
    for m in range(1, m_max + 1):
        pairs, tail = t.row(m, None if t.finite_rows else AUDIT_EPS)
        out.append(exact_sum(abs(c) for _, c in pairs) + tail)
    return out, t.finite_rows


def _row_sum(t: Transform, m: int) -> tuple[Fraction, Fraction]:
    """Row sum over the covered support and the uncovered tail bound."""
    pairs, tail = t.row(m, None if t.finite_rows else AUDIT_EPS)
    return exact_sum(c for _, c in pairs), tail


def silverman_toeplitz_audit(t: Transform, m_horizon: int, n_horizon: int, h: int) -> AuditReport:
    """Check the three regularity conditions up to finite horizons.

    Failures are decisive; passes are evidence at the horizon unless computed
    exactly for every audited row.
    """
    if m_horizon < 1 or n_horizon < 1 or h < 1:
        raise ValueError("horizons and h must be >= 1")
    sample_rows = sorted({1, 2, 3, max(1, m_horizon // 2), m_horizon})
    check_contract(t, sample_rows)

    # (1) bounded absolute row sums
    sums, exact = _abs_row_sums(t, m_horizon)
    worst = max(range(m_horizon), key=lambda i: sums[i])
    tail_slack = Fraction(0) if t.finite_rows else AUDIT_EPS
    if sums[worst] - tail_slack > t.row_bound:
        c1 = ConditionResult("fail", exact, f"row {worst + 1} has absolute sum {sums[worst]} > M = {t.row_bound}")
    elif sums[worst] > t.row_bound:
        c1 = ConditionResult("inconclusive", False,
                             f"row {worst + 1}: covered sum within {tail_slack} of M = {t.row_bound}")
    else:
        c1 = ConditionResult("pass", exact,
                             f"max absolute row sum {sums[worst]} <= M = {t.row_bound} for m <= {m_horizon}",
                             {"max_row": worst + 1, "max_abs_row_sum": fraction_str(sums[worst])})

    # (2) vanishing columns
    below, failing, trending = [], [], True
    for n in range(1, n_horizon + 1):
        if t.column_limit is not None and t.column_limit(n) != 0:
            failing.append(n)
            continue
        thr = Fraction(1, 2 ** (n + 10) * h)
        v = abs(t.c(m_horizon, n))
        if v < thr:
            below.append(n)
        probes = [abs(t.c(m, n)) for m in sorted({max(n, m_horizon // 2), max(n, 3 * m_horizon // 4), m_horizon})]
        if any(b > a for a, b in zip(probes, probes[1:])):
            trending = False
    if failing:
        c2 = ConditionResult("fail", True,
                             f"certified non-zero column limit for n = {failing[:10]}",
                             {"columns": failing, "limits": {str(n): fraction_str(t.column_limit(n)) for n in failing[:10]}})
    elif len(below) == n_horizon:
        c2 = ConditionResult("pass", False,
                             f"|c_{{{m_horizon},n}}| < 1/(2^(n+10) h) for all n <= {n_horizon}")
    else:
        c2 = ConditionResult(
            "inconclusive", False,
            f"{len(below)}/{n_horizon} columns below 1/(2^(n+10) h) by m = {m_horizon}; "
            + ("columns non-increasing on the audited tail" if trending else "columns not monotone on the audited tail"),
            {"columns_below": below[:50], "non_increasing_tail": trending},
        )

    # (3) row sums tend to 1
    total, tail = _row_sum(t, m_horizon)
    defect = abs(1 - total)
    limit = Fraction(1, 2 * h)
    all_one = t.finite_rows and all(_row_sum(t, m)[0] == 1 for m in sample_rows)
    if t.nonnegative and exact:
        all_one = all(s == 1 for s in sums)
    if defect - tail >= limit:
        c3 = ConditionResult("fail", t.finite_rows,
                             f"|1 - sum_n c_{{{m_horizon},n}}| = {defect} >= 1/(2h) = {limit}",
                             {"row_sum": fraction_str(total)})
    elif defect + tail < limit:
        c3 = ConditionResult("pass", bool(all_one) and t.finite_rows,
                             f"|1 - sum_n c_{{{m_horizon},n}}| = {defect} < 1/(2h)"
                             + ("; every audited row sums to exactly 1" if all_one else ""),
                             {"row_sum": fraction_str(total)})
    else:
        c3 = ConditionResult("inconclusive", False, f"row sum {total} +- {tail} straddles the 1/(2h) band")

    return AuditReport(t.name, m_horizon, n_horizon, h, c1, c2, c3)


def load_transform(path) -> Transform:
    import json
    from pathlib import Path

    try:
        spec = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}: invalid JSON ({exc})") from exc
    return transform_from_spec(spec)
