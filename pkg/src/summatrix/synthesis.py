"""Digit streams built phase by phase from blocks, and their verification.

Three constructions live here:

* :func:`synthesize_dense_point` -- a prefix followed by one block forever;
* :func:`synthesize_property_P` -- raw frequencies parked near each target
  of a schedule on a window ``[j, psi^m(j)]``;
* :func:`synthesize_for_transform` -- the same for T-averaged frequencies,
  with the head/middle/tail/row-defect split checked on certified bounds.

:func:`verify_accumulation` re-derives the averaged frequencies from the raw
digits and lists hits, confirming the first few with exact rationals.
"""

from __future__ import annotations

import itertools
import json
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .digits import BlockStream, CountVector, DigitStream, check_base
from .enclosure import Enclosure, apply_certified, distance_enclosure, frequency_enclosures
from .rational import ceil_fraction, decimal_str, fraction_str, parse_fraction
from .schedule import PsiFunction, Witness, PropertyPQuery, dense_bound, find_j
from .simplex import Block, RationalTarget, as_target, block_for, distance_numerators, l1_distance
from .transforms import SpecError, Transform, averaged_freq


class VerificationFailure(AssertionError):
    """A bound that must hold by construction failed: an implementation bug."""


# -- schedules ---------------------------------------------------------------


@dataclass(frozen=True)
class Phase:
    q: RationalTarget
    h: int
    m: int = 1

    def __post_init__(self):
        object.__setattr__(self, "q", as_target(self.q))
        if isinstance(self.h, bool) or not isinstance(self.h, int) or self.h < 1:
            raise SpecError(f"phase field 'h' must be an integer >= 1, got {self.h!r}")
        if isinstance(self.m, bool) or not isinstance(self.m, int) or self.m < 1:
            raise SpecError(f"phase field 'm' must be an integer >= 1, got {self.m!r}")

    def to_json(self) -> dict:
        return {"q": self.q.to_json(), "h": self.h, "m": self.m}


@dataclass(frozen=True)
class Schedule:
    phases: tuple[Phase, ...]
    repeat: bool = False

    def __post_init__(self):
        if not self.phases:
            raise SpecError("schedule needs at least one phase")
        dims = {p.q.base for p in self.phases}
        if len(dims) != 1:
            raise SpecError(f"phase targets have different dimensions {sorted(dims)}")

    @property
    def base(self) -> int:
        return self.phases[0].q.base

    def __iter__(self) -> Iterator[Phase]:
        return itertools.cycle(self.phases) if self.repeat else iter(self.phases)

    def to_json(self) -> dict:
        return {"phases": [p.to_json() for p in self.phases], "repeat": self.repeat}


def schedule_from_json(obj) -> Schedule:
    """Accepts a bare phase list or ``{"phases": [...], "repeat": bool}``."""
    repeat = False
    if isinstance(obj, dict):
        if "phases" not in obj:
            raise SpecError("schedule object needs a 'phases' list")
        repeat = obj.get("repeat", False)
        if not isinstance(repeat, bool):
            raise SpecError("schedule field 'repeat' must be true or false")
        obj = obj["phases"]
    if not isinstance(obj, list):
        raise SpecError("schedule must be a list of phases")
    phases = []
    for k, item in enumerate(obj):
        if not isinstance(item, dict):
            raise SpecError(f"phase {k}: expected an object")
        for key in ("q", "h"):
            if key not in item:
                raise SpecError(f"phase {k}: missing field '{key}'")
        try:
            q = RationalTarget.of(parse_fraction(x) for x in item["q"])
        except (TypeError, ValueError) as exc:
            raise SpecError(f"phase {k}: field 'q' ({exc})") from exc
        phases.append(Phase(q, item["h"], item.get("m", 1)))
        if item.get("repeat"):
            repeat = True
    return Schedule(tuple(phases), repeat)


def load_schedule(path) -> Schedule:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}: invalid JSON ({exc})") from exc
    return schedule_from_json(obj)


# -- the dense-point construction -------------------------------------------


def synthesize_dense_point(prefix: Sequence[int], q, base: int | None = None) -> BlockStream:
    """``prefix`` followed by ``block_for(q)`` repeated forever."""
    q = as_target(q)
    base = check_base(base if base is not None else q.base)
    if base != q.base:
        raise ValueError(f"target has {q.base} entries but base is {base}")
    prefix = tuple(int(d) for d in prefix)
    bad = [d for d in prefix if not 0 <= d < base]
    if bad:
        raise ValueError(f"prefix digits {bad} outside 0..{base - 1}")
    block = block_for(q)
    desc = f"dense:{''.join(map(str, prefix)) or '-'}+{q}"
    return BlockStream(base, [(prefix, 1)] if prefix else [], block.digits, desc)


@dataclass
class DenseBoundReport:
    j: int
    window: tuple[int, int]
    checked_up_to: int
    prefix_length: int
    block_length: int
    bound_at_j: Fraction
    distance_at_j: Fraction
    max_distance: Fraction
    max_distance_at: int

    def to_json(self) -> dict:
        return {
            "j": self.j,
            "window": [self.window[0], self.window[1]],
            "checked_up_to": self.checked_up_to,
            "prefix_length": self.prefix_length,
            "block_length": self.block_length,
            "bound_at_j": fraction_str(self.bound_at_j),
            "distance_at_j": fraction_str(self.distance_at_j),
            "max_distance": fraction_str(self.max_distance),
            "max_distance_at": self.max_distance_at,
        }


def verify_dense_bound(stream: BlockStream, q, h: int, i: int, psi: PsiFunction, m: int, cap: int) -> DenseBoundReport:
    """Pick j by :func:`find_j` and check the dense-point estimate on
    ``[j, min(psi^m(j), cap)]`` with integer arithmetic.

    At each n the distance must sit strictly below the per-n bound
    ``sum_l (N_l(z,s)(t+r) + s(N_l(y,t) + N_l(z,s))) / (s n)`` with
    ``r = (n - t) mod s``, which in turn must not exceed the bound at j, which
    must not exceed ``1/h``.
    """
    q = as_target(q)
    block = block_for(q)
    if tuple(stream.tail) != block.digits:
        raise ValueError("stream does not end in the block of q")
    t = stream.head_length
    s = block.s
    y_counts = stream.counts(t)
    j = find_j(q, block, CountVector(tuple(y_counts), t), h, i, psi)
    hi = psi.iterate(j, m, cap=cap)
    end = min(hi, cap)
    if j > end:
        raise ValueError(f"cap {cap} is below j = {j}")
    counts = stream.counts_array(end)[:, j - 1:end]
    n = np.arange(j, end + 1, dtype=np.int64)
    D = distance_numerators(counts, q, start=j)
    # exact: ||Pi(n) - q||_1 = D / (s n) < 1/h
    over = np.nonzero(h * D >= s * n)[0]
    if len(over):
        k = int(n[over[0]])
        raise VerificationFailure(f"distance at n = {k} is {Fraction(int(D[over[0]]), s * k)} >= 1/{h}")
    z = np.asarray(block.counts, dtype=np.int64)
    y = np.asarray(y_counts, dtype=np.int64)
    r = (n - t) % s
    B = int(z.sum()) * (t + r) + s * int((y + z).sum())
    viol = np.nonzero(D >= B)[0]
    if len(viol):
        k = int(n[viol[0]])
        raise VerificationFailure(f"per-n bound fails at n = {k}")
    G = int((z * (2 * s + t) + s * y).sum())  # s * sum_l (N_l(z,s)(2 + t/s) + N_l(y,t))
    if np.any(B * j > n * G):
        raise VerificationFailure("per-n bound exceeds the bound at j")
    bound_j = Fraction(G, s * j)
    if bound_j > Fraction(1, h):
        raise VerificationFailure(f"bound at j = {bound_j} exceeds 1/h")
    dist_j = Fraction(int(D[0]), s * j)
    if dist_j > bound_j:
        raise VerificationFailure("bound at j does not dominate the distance at j")
    ratio = D.astype(np.float64) / n
    top = int(np.argmax(ratio))
    return DenseBoundReport(j, (j, hi), end, t, s, bound_j, dist_j,
                            Fraction(int(D[top]), s * int(n[top])), int(n[top]))


# -- phase records -----------------------------------------------------------


@dataclass
class DecompositionSample:
    r: int
    head: Fraction
    middle: Fraction
    tail: Fraction
    defect: Fraction
    actual_lo: Fraction
    actual_hi: Fraction

    def within(self, h: int) -> bool:
        sixth = Fraction(1, 6 * h)
        return (self.head <= sixth and self.middle <= sixth and self.tail <= sixth
                and self.defect <= Fraction(1, 2 * h))

    def dominates(self) -> bool:
        return self.actual_lo <= self.head + self.middle + self.tail + self.defect

    def to_json(self) -> dict:
        return {
            "r": self.r,
            "head": decimal_str(self.head),
            "middle": decimal_str(self.middle),
            "tail": decimal_str(self.tail),
            "row_defect": decimal_str(self.defect),
            "actual_upper": decimal_str(self.actual_hi),
        }


@dataclass
class PhaseRecord:
    index: int
    q: RationalTarget
    h: int
    m: int
    start: int
    complete: bool
    j: int | None = None
    j_bound: int | None = None
    tolerance: Fraction | None = None
    raw_window: tuple[int, int] | None = None
    raw_max_distance: Fraction | None = None
    averaged_window: tuple[int, int] | None = None
    averaged_max_distance: Fraction | None = None
    nominal_windows: dict | None = None
    samples: list[DecompositionSample] = field(default_factory=list)
    end: int | None = None
    note: str = ""

    def to_json(self) -> dict:
        out = {
            "index": self.index,
            "q": self.q.to_json(),
            "h": self.h,
            "m": self.m,
            "start": self.start,
            "end": self.end,
            "complete": self.complete,
            "j": self.j,
        }
        if self.j_bound is not None:
            out["dense_bound_j"] = self.j_bound
        if self.tolerance is not None:
            out["raw_tolerance"] = fraction_str(self.tolerance)
        if self.raw_window is not None:
            out["raw_window"] = list(self.raw_window)
            out["raw_max_distance"] = fraction_str(self.raw_max_distance)
        if self.averaged_window is not None:
            out["averaged_window"] = list(self.averaged_window)
            out["averaged_max_distance_upper"] = decimal_str(self.averaged_max_distance)
        if self.nominal_windows is not None:
            out["nominal_windows"] = {k: [str(a), str(b)] for k, (a, b) in self.nominal_windows.items()}
        if self.samples:
            out["decomposition"] = [s.to_json() for s in self.samples]
        if self.note:
            out["note"] = self.note
        return out


@dataclass
class SynthesisReport:
    base: int
    horizon: int
    stream_description: str
    phases: list[PhaseRecord]
    transform: str | None = None
    psi: str | None = None
    seed: int = 0

    @property
    def exhausted(self) -> bool:
        return any(not p.complete for p in self.phases)

    @property
    def completed(self) -> list[PhaseRecord]:
        return [p for p in self.phases if p.complete]

    def all_phases_realized(self, schedule: Schedule) -> bool:
        """Every distinct phase of the schedule completed at least once."""
        done = {(p.q, p.h, p.m) for p in self.completed}
        return all((p.q, p.h, p.m) in done for p in schedule.phases)

    def to_json(self) -> dict:
        return {
            "base": self.base,
            "horizon": self.horizon,
            "transform": self.transform,
            "psi": self.psi,
            "seed": self.seed,
            "stream": self.stream_description,
            "exhausted": self.exhausted,
            "phases": [p.to_json() for p in self.phases],
        }


def _reps_to_reach(length: int, target: int, s: int) -> int:
    return max(0, -(-(target - length) // s))


def _raw_max(counts: np.ndarray, q: RationalTarget, lo: int, hi: int) -> Fraction:
    D = distance_numerators(counts[:, lo - 1:hi], q, start=lo)
    n = np.arange(lo, hi + 1, dtype=np.int64)
    k = int(np.argmax(D.astype(np.float64) / n))
    # float argmax picks the candidate; confirm exactly among near-ties
    vals = D.astype(np.float64) / n
    best = max((Fraction(int(D[i]), q.denominator * int(n[i])) for i in np.nonzero(vals >= vals[k] * (1 - 1e-9))[0]))
    return best


# -- raw property-P synthesis ------------------------------------------------


def synthesize_property_P(base: int, schedule: Schedule, psi: PsiFunction, horizon: int,
                          max_phases: int = 10_000) -> tuple[BlockStream, SynthesisReport]:
    """Append blocks phase by phase so raw frequencies stay within ``1/h``
    of each target on ``[j, min(psi^m(j), horizon)]``.

    ``j`` is :func:`find_j` with the whole stream so far as prefix.  A phase
    whose ``j`` lies beyond the horizon is recorded as incomplete and
    synthesis stops there.
    """
    base = check_base(base)
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if schedule.base != base:
        raise SpecError(f"schedule targets have {schedule.base} entries, base is {base}")
    runs: list[tuple[tuple[int, ...], int]] = []
    counts = np.zeros(base, dtype=np.int64)
    length = 0
    records = []
    last_block = None
    for k, phase in enumerate(schedule):
        if k >= max_phases:
            break
        block = block_for(phase.q)
        last_block = last_block or block
        if length >= horizon:
            records.append(PhaseRecord(k, phase.q, phase.h, phase.m, length, False, note="horizon reached"))
            break
        prefix = CountVector(tuple(int(c) for c in counts), length)
        j = find_j(phase.q, block, prefix, phase.h, max(1, length), psi)
        if j > horizon:
            records.append(PhaseRecord(k, phase.q, phase.h, phase.m, length, False, j=j,
                                       note=f"j = {j} lies beyond the horizon"))
            break
        hi = psi.iterate(j, phase.m, cap=horizon)
        end = min(hi, horizon)
        reps = _reps_to_reach(length, end, block.s)
        runs.append((block.digits, reps))
        counts += reps * np.asarray(block.counts, dtype=np.int64)
        start = length
        length += reps * block.s
        last_block = block
        records.append(PhaseRecord(k, phase.q, phase.h, phase.m, start, True, j=j,
                                   raw_window=(j, hi), end=length))
    tail = last_block.digits if last_block else block_for(schedule.phases[0].q).digits
    stream = BlockStream(base, runs, tail, description=f"synthesized:property-P[{psi.name}]")
    _fill_raw_maxima(stream, records)
    return stream, SynthesisReport(base, horizon, stream.description, records, psi=psi.name)


def _fill_raw_maxima(stream: BlockStream, records: list[PhaseRecord]) -> None:
    done = [r for r in records if r.complete]
    if not done:
        return
    top = max(min(r.raw_window[1], r.end) for r in done)
    counts = stream.counts_array(top)
    for r in done:
        lo, hi = r.raw_window[0], min(r.raw_window[1], r.end)
        r.raw_max_distance = _raw_max(counts, r.q, lo, hi)
        if r.raw_max_distance >= Fraction(1, r.h):
            raise VerificationFailure(f"phase {r.index}: raw distance {r.raw_max_distance} >= 1/{r.h}")


# -- synthesis for a transform ----------------------------------------------


def default_dwell() -> PsiFunction:
    """Window function ``n -> n + 1`` used when no other is given."""
    return PsiFunction.from_callable(lambda n: n + 1, "n+1")


def _last_raw_bad(block: Block, y_counts: Sequence[int], t0: int, tol: Fraction) -> int:
    """Largest ``n > t0`` with ``||Pi(n) - q||_1 >= tol`` once only blocks of
    ``q`` follow position ``t0``; ``t0`` if there is none.

    Past ``t0`` the scaled distance ``D(n) = sum_l |s N_l(n) - Q_l n|`` depends
    only on ``(n - t0) mod s``, so each residue class has a closed-form
    last bad index.
    """
    q = block.target
    s = block.s
    Q = q.numerators
    last = t0
    running = [0] * q.base
    for r in range(s):
        P = sum(abs(s * (y + z) - Ql * (t0 + r)) for y, z, Ql in zip(y_counts, running, Q))
        # bad iff D/(s n) >= tol iff n <= P / (s tol)
        limit = P * tol.denominator // (s * tol.numerator)
        first = t0 + (r if r else s)
        if limit >= first:
            last = max(last, first + (limit - first) // s * s)
        running[block.digits[r]] += 1
    return last


def _sample_points(a: int, b: int, rng: random.Random, dense_limit: int = 10_000, extra: int = 16) -> list[int]:
    if b - a + 1 <= dense_limit:
        return list(range(a, b + 1))
    pts = {a, b}
    r = a
    while r < b:
        pts.add(r)
        r = max(r + 1, math.ceil(r * 1.1))
    pts.update(rng.randint(a, b) for _ in range(extra))
    return sorted(pts)


def _valid_rows(t: Transform, length: int, eps: Fraction) -> int:
    """Largest R such that every row r <= R reads only the first ``length`` digits."""
    if t.lower_triangular and t.finite_rows:
        return length
    r = 0
    while r < length:
        end = t.row_end(r + 1, None if t.finite_rows else eps)
        if end > length:
            break
        r += 1
    return r


def _next_fail(passes: np.ndarray) -> np.ndarray:
    n = len(passes)
    idx = np.where(passes, n + 1, np.arange(1, n + 1))
    return np.minimum.accumulate(idx[::-1])[::-1]


def synthesize_for_transform(t: Transform, base: int, schedule: Schedule, horizon: int,
                             psi: PsiFunction | None = None, seed: int = 0,
                             max_phases: int = 10_000) -> tuple[BlockStream, SynthesisReport]:
    """Steer the T-averaged frequencies through the schedule.

    Per phase ``(q, h, m)`` with ``M = ceil(row bound)``:

    1. append blocks of ``q``; raw frequencies are within ``1/(6Mh)`` of q from
       ``j'`` on (computed in closed form, checked against the dense-point
       bound and against the digits);
    2. the averaged window starts at the least ``a >= j'`` such that on every
       ``r`` in ``[a, min(psi^m(a), horizon)]`` the certified upper bounds of
       head (n <= j'), middle (n > j'), tail and row defect are within
       ``1/(6h)``, ``1/(6h)``, ``1/(6h)`` and ``1/(2h)``;
    3. blocks are appended through the end of that window and the next
       phase starts.
    """
    base = check_base(base)
    if schedule.base != base:
        raise SpecError(f"schedule targets have {schedule.base} entries, base is {base}")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    psi = psi or default_dwell()
    rng = random.Random(seed)
    Mc = t.uniform_bound
    A = t.absolute()
    runs: list[tuple[tuple[int, ...], int]] = []
    y_counts = [0] * base
    length = 0
    records: list[PhaseRecord] = []
    last_block = None

    for k, phase in enumerate(schedule):
        if k >= max_phases:
            break
        q, h = phase.q, phase.h
        block = block_for(q)
        if length >= horizon:
            records.append(PhaseRecord(k, q, h, phase.m, length, False, note="horizon reached"))
            break
        tol = Fraction(1, 6 * Mc * h)
        eps = Fraction(1, 12 * h)
        tail_term = Fraction(0) if t.finite_rows else 2 * eps
        jp = _last_raw_bad(block, y_counts, length, tol) + 1
        j_bound = ceil_fraction(6 * Mc * h * dense_bound(block, CountVector(tuple(y_counts), length), base))
        if jp > max(j_bound, length + 1):
            raise VerificationFailure(f"phase {k}: j' = {jp} exceeds the dense-point bound {j_bound}")
        record = PhaseRecord(k, q, h, phase.m, length, False, j=jp, j_bound=j_bound, tolerance=tol)

        L = min(horizon, max(2 * jp, jp + 1024))
        found = None
        while True:
            reps = _reps_to_reach(length, L, block.s)
            trial = BlockStream(base, runs + [(block.digits, reps)], block.digits)
            counts = trial.counts_array(L)
            D = distance_numerators(counts, q)
            n = np.arange(1, L + 1, dtype=np.int64)
            tail_raw = D[jp - 1:] * (6 * Mc * h) >= q.denominator * n[jp - 1:]
            if tail_raw.any():
                raise VerificationFailure(f"phase {k}: raw distance reaches {tol} after j' = {jp}")
            dist = Enclosure.from_ratios(D, q.denominator * n)
            R = _valid_rows(t, L, eps)
            head = apply_certified(A, dist.masked(n <= jp - 1), R, eps)
            mid = apply_certified(A, dist.masked(n >= jp), R, eps)
            defect = apply_certified(t, Enclosure.constant(1, L), R, eps).abs_diff(1)
            sixth = Fraction(1, 6 * h)
            passes = (head.certified_at_most(sixth) & mid.certified_at_most(sixth)
                      & defect.certified_at_most(Fraction(1, 2 * h)))
            passes = np.asarray(passes, dtype=bool) & (tail_term <= sixth)
            nf = _next_fail(passes)
            r = jp
            need_more = False
            while r <= R:
                if not passes[r - 1]:
                    r += 1
                    continue
                end = min(psi.iterate(r, phase.m, cap=horizon), horizon)
                if end > R:
                    need_more = True
                    break
                if nf[r - 1] > end:
                    found = (r, end)
                    break
                r = int(nf[r - 1]) + 1
            if found or L >= horizon or (not need_more and R >= horizon):
                break
            L = min(horizon, 2 * L)

        if found is None:
            record.note = f"no averaged window found before the horizon {horizon}"
            records.append(record)
            last_block = last_block or block
            break

        a, b = found
        freqs = [apply_certified(t, f, b, eps) for f in frequency_enclosures(counts[:, :b])]
        actual = distance_enclosure(freqs, q.entries)
        record.raw_window = (jp, b)
        record.raw_max_distance = _raw_max(counts, q, jp, b) if b >= jp else Fraction(0)
        record.averaged_window = (a, b)
        record.averaged_max_distance = actual.upper_max(a, b)
        record.nominal_windows = {
            "raw": (jp, psi.iterate(jp, phase.m + 2, cap=10**30)),
            "averaged": (psi(jp), psi.iterate(jp, phase.m + 1, cap=10**30)),
        }
        for r in _sample_points(a, b, rng):
            sample = DecompositionSample(
                r,
                head.interval(r)[1],
                mid.interval(r)[1],
                tail_term,
                defect.interval(r)[1],
                *actual.interval(r),
            )
            if not sample.within(h):
                raise VerificationFailure(f"phase {k}: decomposition bound fails at r = {r}")
            if not sample.dominates():
                raise VerificationFailure(f"phase {k}: parts do not dominate the distance at r = {r}")
            record.samples.append(sample)
        if record.averaged_max_distance > Fraction(1, h):
            raise VerificationFailure(f"phase {k}: averaged distance above 1/h in its window")

        reps = _reps_to_reach(length, b, block.s)
        runs.append((block.digits, reps))
        for d, c in enumerate(block.counts):
            y_counts[d] += reps * c
        length += reps * block.s
        last_block = block
        record.complete = True
        record.end = length
        records.append(record)

    tail = (last_block or block_for(schedule.phases[0].q)).digits
    stream = BlockStream(base, runs, tail, description=f"synthesized:{t.name}")
    report = SynthesisReport(base, horizon, stream.description, records, transform=t.name,
                             psi=psi.name, seed=seed)
    return stream, report


# -- accumulation -------------------------------------------------------------


def _ranges(idx: np.ndarray) -> list[tuple[int, int]]:
    if len(idx) == 0:
        return []
    breaks = np.nonzero(np.diff(idx) != 1)[0]
    starts = np.concatenate(([0], breaks + 1))
    ends = np.concatenate((breaks, [len(idx) - 1]))
    return [(int(idx[s]), int(idx[e])) for s, e in zip(starts, ends)]


@dataclass
class ConfirmedHit:
    r: int
    entries: tuple[Fraction, ...]
    distance: Fraction

    def to_json(self) -> dict:
        return {"r": self.r, "distance": fraction_str(self.distance),
                "freqT": [fraction_str(x) for x in self.entries]}


@dataclass
class TargetHits:
    q: RationalTarget
    hits: np.ndarray
    undecided: list[int]
    confirmed: list[ConfirmedHit]
    min_distance_upper: Fraction

    @property
    def count(self) -> int:
        return int(len(self.hits))

    def to_json(self) -> dict:
        return {
            "q": self.q.to_json(),
            "hit_count": self.count,
            "hit_ranges": [list(r) for r in _ranges(self.hits)],
            "undecided": self.undecided,
            "confirmed": [c.to_json() for c in self.confirmed],
            "min_distance_upper": decimal_str(self.min_distance_upper),
        }


@dataclass
class AccumulationReport:
    transform: str
    h: int
    horizon: int
    min_hits: int
    targets: list[TargetHits]
    freqs: list[Enclosure] = field(repr=False, default_factory=list)
    distances: list[Enclosure] = field(repr=False, default_factory=list)

    @property
    def passed(self) -> bool:
        return all(tgt.count >= self.min_hits for tgt in self.targets)

    def to_json(self) -> dict:
        return {
            "transform": self.transform,
            "h": self.h,
            "horizon": self.horizon,
            "min_hits": self.min_hits,
            "passed": self.passed,
            "targets": [tgt.to_json() for tgt in self.targets],
        }


def verify_accumulation(stream: DigitStream, t: Transform, targets: Sequence, h: int, horizon: int,
                        min_hits: int = 1, confirm: int | None = None,
                        resolve_limit: int = 32) -> AccumulationReport:
    """Every ``r <= horizon`` with ``||Pi^T(x, r) - q||_1 <= 1/h``.

    Candidates come from certified enclosures of the averaged frequencies.
    The first ``confirm`` hits per target (default ``min_hits``) are then
    recomputed exactly by :func:`averaged_freq`, and up to ``resolve_limit``
    enclosures too wide to decide are settled the same way.
    """
    if horizon < 1 or min_hits < 1 or h < 1:
        raise ValueError("horizon, h and min_hits must be >= 1")
    targets = [as_target(q) for q in targets]
    if any(q.base != stream.base for q in targets):
        raise ValueError("target dimension differs from the stream base")
    confirm = min_hits if confirm is None else confirm
    eps = Fraction(1, 2**40)
    counts = stream.counts_array(horizon)
    R = _valid_rows(t, horizon, eps)
    freqs = [apply_certified(t, f, R, eps) for f in frequency_enclosures(counts)]
    bound = Fraction(1, h)
    out = []
    dists = []
    for q in targets:
        dist = distance_enclosure(freqs, q.entries)
        dists.append(dist)
        sure = np.asarray(dist.certified_at_most(bound), dtype=bool)
        maybe = ~sure & ~np.asarray(dist.certified_above(bound), dtype=bool)
        hits = list(np.nonzero(sure)[0] + 1)
        for r in (np.nonzero(maybe)[0] + 1)[:resolve_limit]:
            exact = averaged_freq(t, stream, int(r), None if t.finite_rows else eps)
            if l1_distance(exact.entries, q.entries) + 2 * exact.truncation_error_bound <= bound:
                hits.append(int(r))
        undecided = [int(r) for r in (np.nonzero(maybe)[0] + 1)[resolve_limit:]]
        hits = np.array(sorted(int(r) for r in hits), dtype=np.int64)
        confirmed = []
        for r in hits[:confirm]:
            exact = averaged_freq(t, stream, int(r), None if t.finite_rows else eps)
            d = l1_distance(exact.entries, q.entries)
            if d > bound:
                raise VerificationFailure(f"r = {r}: enclosure says hit, exact distance {d} > {bound}")
            confirmed.append(ConfirmedHit(int(r), exact.entries, d))
        lo = Fraction(int(min(dist.hi)), dist.one) if R else Fraction(2)
        out.append(TargetHits(q, hits, undecided, confirmed, lo))
    return AccumulationReport(t.name, h, horizon, min_hits, out, freqs, dists)


def perturbations(q, k: int, count: int, seed: int = 0) -> list[tuple[Fraction, ...]]:
    """Rational points ``p`` of the simplex with ``||p - q||_1 <= 1/k``.

    Each moves mass ``delta <= 1/(2k)`` from one coordinate to another; the
    first one sits exactly at distance ``1/k`` when q allows it.
    """
    q = as_target(q)
    rng = random.Random(seed)
    out = []
    entries = list(q.entries)
    N = len(entries)
    for c in range(count):
        src = max(range(N), key=lambda i: (entries[i], -i)) if c == 0 else rng.randrange(N)
        dst = (src + 1 + (0 if c == 0 else rng.randrange(N - 1))) % N
        delta = min(Fraction(1, 2 * k), entries[src])
        if c:
            delta *= Fraction(rng.randint(1, 7), 7)
        p = entries[:]
        p[src] -= delta
        p[dst] += delta
        out.append(tuple(p))
    return out


@dataclass
class TransferCheck:
    checked: int
    worst: Fraction
    failures: list[tuple[int, str]]

    @property
    def passed(self) -> bool:
        return not self.failures


def triangle_transfer(report: AccumulationReport, k: int, count: int = 3, seed: int = 0) -> TransferCheck:
    """For points p within ``1/k`` of a hit target, check
    ``||p - Pi^T(x, r)||_1 <= 2/k`` at every hit.

    Confirmed hits use their exact vectors; the rest use the certified upper
    bound of the enclosure, which is a rigorous check as well.
    """
    two_k = Fraction(2, k)
    checked = 0
    worst = Fraction(0)
    failures = []
    for tgt in report.targets:
        ps = perturbations(tgt.q, k, count, seed)
        for p in ps:
            if l1_distance(p, tgt.q.entries) > Fraction(1, k):
                raise ValueError("perturbation outside the 1/k ball")
        exact_rs = {c.r for c in tgt.confirmed}
        for c in tgt.confirmed:
            for p in ps:
                d = l1_distance(p, c.entries)
                worst = max(worst, d)
                checked += 1
                if d > two_k:
                    failures.append((c.r, f"exact distance {d} to {p}"))
        if tgt.count:
            idx = tgt.hits - 1
            for p in ps:
                enc = distance_enclosure([Enclosure(f.lo[idx], f.hi[idx], f.bits) for f in report.freqs], p)
                ok = np.asarray(enc.certified_at_most(two_k), dtype=bool)
                checked += int(len(idx)) - len(exact_rs)
                worst = max(worst, Fraction(int(enc.hi.max()), enc.one))
                for i in np.nonzero(~ok)[0][:10]:
                    r = int(tgt.hits[i])
                    if r not in exact_rs:
                        failures.append((r, f"upper bound {decimal_str(Fraction(int(enc.hi[i]), enc.one))}"))
    return TransferCheck(checked, worst, failures)


# -- trace CSV ------------------------------------------------------------------


def _decimal_column(enc: Enclosure, rows: np.ndarray, places: int = 12) -> list[str]:
    """Midpoints rounded to ``places`` decimals with integer arithmetic."""
    scale = 10**places
    out = []
    denom = 1 << (enc.bits + 1)
    for r in rows:
        v = (int(enc.lo[r - 1]) + int(enc.hi[r - 1])) * scale
        q, rem = divmod(v, denom)
        if 2 * rem > denom or (2 * rem == denom and q % 2):
            q += 1
        sign = "-" if q < 0 else ""
        q = abs(q)
        out.append(f"{sign}{q // scale}.{q % scale:0{places}d}")
    return out


def trace_rows(report: AccumulationReport, stream: DigitStream, t: Transform,
               exact_upto: int = 200) -> tuple[list[str], list[list[str]]]:
    """CSV header and rows: a geometric grid of r plus every hit-range end.

    Decimal columns come from the enclosure midpoints.  Exact columns are
    filled for ``r <= exact_upto`` and for exactly confirmed hits, and left
    empty elsewhere.
    """
    horizon = len(report.freqs[0]) if report.freqs else 0
    rows = set()
    r = 1
    while r <= horizon:
        rows.add(r)
        r = max(r + 1, math.ceil(r * 1.1))
    if horizon:
        rows.add(horizon)
    confirmed = {}
    for tgt in report.targets:
        for lo, hi in _ranges(tgt.hits):
            rows.update((lo, hi))
        for c in tgt.confirmed:
            confirmed[c.r] = c.entries
    grid = np.array(sorted(rows), dtype=np.int64)
    k = len(report.targets)
    N = len(report.freqs)
    header = (["r"] + [f"dist_to_target_{i + 1}" for i in range(k)] + [f"freqT_{l}" for l in range(N)]
              + [f"dist_to_target_{i + 1}_exact" for i in range(k)] + [f"freqT_{l}_exact" for l in range(N)])
    dist_cols = [_decimal_column(d, grid) for d in report.distances]
    freq_cols = [_decimal_column(f, grid) for f in report.freqs]
    body = []
    for i, r in enumerate(grid):
        r = int(r)
        exact = confirmed.get(r)
        if exact is None and r <= exact_upto:
            exact = averaged_freq(t, stream, r, None if t.finite_rows else Fraction(1, 2**40)).entries
        row = [str(r)] + [c[i] for c in dist_cols] + [c[i] for c in freq_cols]
        if exact is not None:
            row += [fraction_str(l1_distance(exact, tgt.q.entries)) for tgt in report.targets]
            row += [fraction_str(x) for x in exact]
        else:
            row += [""] * (k + N)
        body.append(row)
    return header, body
