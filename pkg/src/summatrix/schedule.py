"""Regularity constants, the window function psi, and property-P windows.

For a transform T and accuracy h the constants are

* ``M_m``: least M with ``sum_{n >= M} |c_{m,n}| <= 1/(12h)``,
* ``N_n``: least N with ``|c_{m,n}| < 1/(2^(n+10) h)`` for every ``m > N``,
* ``K``:   least K with ``|1 - sum_n c_{m,n}| < 1/(2h)`` for every ``m > K``,

and psi is ``psi(0) = K + 2``, ``psi(n) = M_n + N_n + n^2 + psi(n-1)``.
Cesàro and identity have closed forms; other transforms are scanned.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .digits import CountVector, FrequencyTrajectory
from .rational import ceil_fraction, decimal_str, exact_sum, fraction_str
from .simplex import Block, RationalTarget, as_target, block_for, distance_numerators, l1_distance
from .transforms import Transform


class ConstantUnavailable(ValueError):
    """A regularity constant could not be certified within the scan budget."""


class PsiTooSlow(ValueError):
    """No j with h*j < psi(j) was found in the search range."""


class WindowExceedsHorizon(ValueError):
    """A candidate window is clean up to the horizon but extends past it."""


def _kind(t: Transform) -> str | None:
    return t.spec.get("kind") if t.spec else None


class RegularityConstants:
    """Lazily computed, memoized constants ``M_m``, ``N_n`` and ``K``.

    ``m_range`` and ``n_range`` only set which indices :meth:`to_json` and
    :meth:`cross_check` cover; :meth:`M` and :meth:`N` accept any index.
    ``scan_limit`` caps how far a column is scanned when no closed form is
    known.
    """

    def __init__(self, t: Transform, h: int, m_range: int = 100, n_range: int = 3,
                 scan_limit: int = 50_000):
        if h < 1 or m_range < 1 or n_range < 1:
            raise ValueError("h, m_range and n_range must be >= 1")
        if not t.finite_rows and t.tail_bound is None:
            raise ConstantUnavailable(f"{t.name}: infinite rows without a tail bound")
        self.transform = t
        self.h = h
        self.m_range = m_range
        self.n_range = n_range
        self.scan_limit = scan_limit
        self.uniform_bound_M = t.row_bound
        self._lock = threading.Lock()
        self._M: dict[int, int] = {}
        self._N: dict[int, int] = {}
        self._K: int | None = None
        self.K_certified = False

    @property
    def closed_form(self) -> bool:
        return _kind(self.transform) in ("identity", "cesaro")

    @property
    def tail_threshold(self) -> Fraction:
        return Fraction(1, 12 * self.h)

    def column_threshold(self, n: int) -> Fraction:
        return Fraction(1, 2 ** (n + 10) * self.h)

    # -- M_m ---------------------------------------------------------------

    def M(self, m: int) -> int:
        if m < 1:
            raise ValueError("m >= 1")
        if m not in self._M:
            kind = _kind(self.transform)
            if kind == "cesaro":
                v = m + 1 - m // (12 * self.h)
            elif kind == "identity":
                v = m + 1
            else:
                v = self.brute_M(m)
            with self._lock:
                self._M[m] = v
        return self._M[m]

    def brute_M(self, m: int) -> int:
        """Least M from exact suffix sums of row ``m``.

        Infinite rows fall back to the transform's own tail bound, which is
        certified but not necessarily minimal.
        """
        t = self.transform
        if not t.finite_rows:
            return t.tail_bound(m, self.tail_threshold)
        last = t.last_index(m)
        tail = Fraction(0)
        best = last + 1
        for n in range(last, 0, -1):
            tail += abs(t.c(m, n))
            if tail > self.tail_threshold:
                break
            best = n
        return best

    # -- N_n ---------------------------------------------------------------

    def N(self, n: int) -> int:
        if n < 1:
            raise ValueError("n >= 1")
        if n not in self._N:
            kind = _kind(self.transform)
            if kind == "cesaro":
                v = 2 ** (n + 10) * self.h
            elif kind == "identity":
                v = n
            else:
                v = self.brute_N(n)
            with self._lock:
                self._N[n] = v
        return self._N[n]

    def brute_N(self, n: int, limit: int | None = None) -> int:
        """Least N from a column scan, certified by a monotone tail.

        The scan runs until the column is below threshold at some m from
        which ``|c_{m,n}|`` is known to be non-increasing.
        """
        t = self.transform
        limit = self.scan_limit if limit is None else limit
        if t.column_limit is not None and t.column_limit(n) != 0:
            raise ConstantUnavailable(f"{t.name}: column {n} does not tend to 0")
        mono = t.monotone_from(n) if t.monotone_from else None
        if mono is None:
            raise ConstantUnavailable(f"{t.name}: no certified monotone tail for column {n}")
        thr = self.column_threshold(n)
        last_bad = 0
        m = 1
        while m <= limit:
            if abs(t.c(m, n)) >= thr:
                last_bad = m
            elif m >= mono:
                return last_bad
            m += 1
        raise ConstantUnavailable(f"{t.name}: column {n} still above 1/(2^{n + 10}h) at m = {limit}")

    # -- K -----------------------------------------------------------------

    @property
    def K(self) -> int:
        if self._K is None:
            self._K, self.K_certified = self._compute_K()
        return self._K

    def _compute_K(self) -> tuple[int, bool]:
        t = self.transform
        kind = _kind(t)
        if kind in ("identity", "cesaro", "holder", "weighted"):
            # rows of these kinds sum to exactly 1
            return 0, True
        limit = Fraction(1, 2 * self.h)
        last_bad = 0
        for m in range(1, self.m_range + 1):
            pairs, tail = t.row(m, None if t.finite_rows else Fraction(1, 10**9))
            if abs(1 - exact_sum(c for _, c in pairs)) + tail >= limit:
                last_bad = m
        return last_bad, False

    # -- reporting ---------------------------------------------------------

    def cross_check(self, m_samples: Sequence[int], n_samples: Sequence[int]) -> list[str]:
        """Compare closed forms against brute force; returns mismatch messages."""
        problems = []
        for m in m_samples:
            if self.M(m) != self.brute_M(m):
                problems.append(f"M_{m}: closed form {self.M(m)} vs scan {self.brute_M(m)}")
        for n in n_samples:
            if self.N(n) <= self.scan_limit and self.N(n) != self.brute_N(n):
                problems.append(f"N_{n}: closed form {self.N(n)} vs scan {self.brute_N(n)}")
        return problems

    def to_json(self, m_values: Sequence[int] | None = None, n_values: Sequence[int] | None = None) -> dict:
        m_values = list(m_values) if m_values is not None else sorted({1, 2, self.m_range})
        n_values = list(n_values) if n_values is not None else list(range(1, self.n_range + 1))
        return {
            "transform": self.transform.name,
            "h": self.h,
            "uniform_bound_M": fraction_str(self.uniform_bound_M),
            "K": self.K,
            "K_certified": self.K_certified or self.closed_form,
            "tail_index": {str(m): self.M(m) for m in m_values},
            "column_decay_index": {str(n): self.N(n) for n in n_values},
            "method": "closed form" if self.closed_form else "scan",
        }


def compute_constants(t: Transform, h: int, m_range: int = 100, n_range: int = 3,
                      cross_check: bool = True) -> RegularityConstants:
    """Constants for ``t`` at accuracy ``h``.

    Closed forms are compared against a direct scan at a few indices and a
    mismatch raises, since that can only be an implementation error.
    """
    c = RegularityConstants(t, h, m_range, n_range)
    if cross_check and c.closed_form:
        problems = c.cross_check(sorted({1, 2, max(1, m_range // 2), m_range}), [1])
        if problems:
            raise AssertionError("; ".join(problems))
    return c


class PsiFunction:
    """A strictly increasing window function with memoized exact values."""

    def __init__(self, fn: Callable[[int], int], name: str, constants: RegularityConstants | None = None):
        self._fn = fn
        self.name = name
        self.constants = constants
        self._memo: dict[int, int] = {}
        self._lock = threading.Lock()

    @classmethod
    def from_constants(cls, c: RegularityConstants) -> "PsiFunction":
        values = [c.K + 2]
        lock = threading.Lock()

        def psi(n: int) -> int:
            with lock:
                while len(values) <= n:
                    k = len(values)
                    v = c.M(k) + c.N(k) + k * k + values[-1]
                    floor = max(k * k, c.M(k), c.N(k), c.K) + 1
                    if not (v > values[-1] and v > floor):
                        raise AssertionError(f"psi({k}) = {v} breaks growth/domination")
                    values.append(v)
                return values[n]

        return cls(psi, f"psi[{c.transform.name}, h={c.h}]", c)

    @classmethod
    def from_callable(cls, fn: Callable[[int], int], name: str = "override") -> "PsiFunction":
        return cls(fn, name)

    def __call__(self, n: int) -> int:
        if n < 0:
            raise ValueError("psi is defined for n >= 0")
        v = self._memo.get(n)
        if v is None:
            v = int(self._fn(n))
            if self.constants is None and v <= n:
                raise ValueError(f"{self.name}: psi({n}) = {v} must exceed n")
            prev = self._memo.get(n - 1)
            if prev is not None and v <= prev:
                raise ValueError(f"{self.name}: not strictly increasing at {n}")
            with self._lock:
                self._memo[n] = v
        return v

    def iterate(self, n: int, times: int, cap: int | None = None) -> int:
        """``psi^times(n)``; once a value exceeds ``cap`` it is returned as is."""
        v = n
        for _ in range(times):
            v = self(v)
            if cap is not None and v > cap:
                break
        return v


def build_psi(c: RegularityConstants) -> PsiFunction:
    return PsiFunction.from_constants(c)


def square_plus_one() -> PsiFunction:
    """The test window function ``n -> n^2 + 1``."""
    return PsiFunction.from_callable(lambda n: n * n + 1, "n^2+1")


def psi_from_text(text: str) -> PsiFunction:
    """Named test window functions for configs: ``n^2+1``, ``n+1``, ``2n``."""
    table = {
        "n^2+1": square_plus_one,
        "n+1": lambda: PsiFunction.from_callable(lambda n: n + 1, "n+1"),
        "2n": lambda: PsiFunction.from_callable(lambda n: max(2 * n, n + 1), "2n"),
    }
    key = text.replace(" ", "").replace("**", "^")
    if key not in table:
        raise ValueError(f"unknown psi {text!r}; choose from {sorted(table)}")
    return table[key]()


# -- find_j ------------------------------------------------------------------


def dense_bound(block: Block, prefix_counts: CountVector, base: int) -> Fraction:
    """``N * max_l (N_l(z,s)(2 + t/s) + N_l(y,t))`` as an exact rational."""
    s = block.s
    t = prefix_counts.n
    terms = [zc * (2 + Fraction(t, s)) + yc for zc, yc in zip(block.counts, prefix_counts.counts)]
    return base * max(terms)


def find_j(q, block: Block | None, prefix_counts: CountVector, h: int, i: int, psi: PsiFunction,
           search: int = 10**7) -> int:
    """Least j with ``j >= max(i, t, ceil(h * dense_bound))`` and ``h*j < psi(j)``."""
    q = as_target(q)
    block = block or block_for(q)
    if block.target != q:
        raise ValueError("block does not realize q")
    if len(prefix_counts.counts) != q.base:
        raise ValueError("prefix counts and target differ in dimension")
    if h < 1 or i < 1:
        raise ValueError("h and i must be >= 1")
    j = max(i, prefix_counts.n, ceil_fraction(h * dense_bound(block, prefix_counts, q.base)))
    stop = j + search
    while j < stop:
        if h * j < psi(j):
            return j
        j += 1
    raise PsiTooSlow(f"no j in [{stop - search}, {stop}) with h*j < psi(j) for h = {h}")


# -- property P ---------------------------------------------------------------


@dataclass(frozen=True)
class PropertyPQuery:
    i: int
    m: int
    q: RationalTarget
    h: int
    psi: PsiFunction | None = None
    windows: tuple[tuple[int, int], ...] | None = None

    def __post_init__(self):
        if min(self.i, self.m, self.h) < 1:
            raise ValueError("i, m and h must be >= 1")
        if (self.psi is None) == (self.windows is None):
            raise ValueError("give exactly one of psi or an explicit window list")
        object.__setattr__(self, "q", as_target(self.q))

    def to_json(self) -> dict:
        out = {"i": self.i, "m": self.m, "h": self.h, "q": self.q.to_json()}
        out["psi"] = self.psi.name if self.psi else None
        if self.windows:
            out["windows"] = [list(w) for w in self.windows]
        return out


@dataclass
class Witness:
    query: PropertyPQuery
    j: int
    window: tuple[int, int]
    verified_up_to: int
    max_distance_seen: Fraction
    truncated: bool = False

    def to_json(self) -> dict:
        return {
            "query": self.query.to_json(),
            "j": self.j,
            "window": list(self.window),
            "verified_up_to": self.verified_up_to,
            "truncated": self.truncated,
            "max_distance_seen": fraction_str(self.max_distance_seen),
            "max_distance_decimal": decimal_str(self.max_distance_seen),
        }


@dataclass
class Refutation:
    query: PropertyPQuery
    horizon: int
    reason: str
    bad_indices: list[int] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"query": self.query.to_json(), "horizon": self.horizon, "refuted_at_horizon": True,
                "reason": self.reason, "sample_bad_indices": self.bad_indices[:20]}


def _distance_fractions(trajectory, q: RationalTarget, horizon: int):
    """Exact distances as (numerator, denominator) integer arrays."""
    if isinstance(trajectory, FrequencyTrajectory):
        D = distance_numerators(trajectory.counts[:, :horizon], q)
        den = q.denominator * np.arange(1, horizon + 1, dtype=np.int64)
        return D, den
    num, den = [], []
    for n in range(horizon):
        d = l1_distance(trajectory[n], q.entries)
        num.append(d.numerator)
        den.append(d.denominator)
    return np.array(num, dtype=object), np.array(den, dtype=object)


def check_property_P(trajectory, query: PropertyPQuery, horizon: int, cap: int | None = None):
    """Least witness j on ``trajectory`` (``trajectory[n-1]`` is ``x_n``).

    The window is ``[j, psi^m(j)]`` closed, cut at ``cap`` when one is
    given.  Without a cap a window that is clean up to ``horizon`` but
    reaches beyond it raises :class:`WindowExceedsHorizon`.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if len(trajectory) < horizon:
        raise ValueError(f"trajectory has {len(trajectory)} terms, horizon is {horizon}")
    q, h = query.q, query.h
    num, den = _distance_fractions(trajectory, q, horizon)
    bad = num * h >= den
    # next_bad[k] = least 1-based index >= k+1 that is bad, horizon+1 if none
    idx = np.where(bad, np.arange(1, horizon + 1), horizon + 1)
    next_bad = np.minimum.accumulate(idx[::-1])[::-1]

    if query.windows is not None:
        candidates = [(lo, hi) for lo, hi in query.windows if lo >= query.i]
    else:
        candidates = None

    def window_for(j: int) -> int:
        return query.psi.iterate(j, query.m, cap=max(horizon, cap or 0))

    if candidates is not None:
        j_values = iter([lo for lo, _ in candidates])
        ends = dict(candidates)
    else:
        ends = None
    j = query.i - 1
    while True:
        if ends is not None:
            j = next(j_values, None)
            if j is None:
                break
        else:
            j += 1
        if j > horizon:
            break
        if bad[j - 1]:
            continue
        if query.psi is not None and h * j > query.psi(j):
            continue
        hi = ends[j] if ends is not None else window_for(j)
        limit = min(hi, cap) if cap is not None else hi
        checked = min(limit, horizon)
        if next_bad[j - 1] <= checked:
            if ends is None:
                # psi is increasing, so every start up to that bad index fails too
                j = int(next_bad[j - 1])
            continue
        if limit > horizon:
            raise WindowExceedsHorizon(
                f"window [{j}, {hi}] is clean up to the horizon {horizon} but extends past it; supply a cap")
        seg = slice(j - 1, checked)
        k = _argmax_ratio(num[seg], den[seg])
        worst = Fraction(int(num[j - 1 + k]), int(den[j - 1 + k]))
        return Witness(query, j, (j, hi), checked, worst, truncated=limit < hi)
    bad_list = [int(k) for k in np.nonzero(bad[query.i - 1:])[0][-20:] + query.i]
    return Refutation(query, horizon, f"no j in [{query.i}, {horizon}] has a clean window", bad_list)


def _argmax_ratio(num, den) -> int:
    approx = np.asarray(num, dtype=np.float64) / np.asarray(den, dtype=np.float64)
    top = approx.max()
    best = None
    for k in np.nonzero(approx >= top * (1 - 1e-9))[0]:
        v = Fraction(int(num[k]), int(den[k]))
        if best is None or v > best[0]:
            best = (v, int(k))
    return best[1]
