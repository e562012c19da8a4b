"""Non-terminating base-N digit streams and exact digit statistics.

Digits are indexed from 1, so ``stream.digit(1)`` is the first digit after the
radix point.  Array-returning helpers use 0-based storage: position ``k`` of an
array holds the value for prefix length / index ``k + 1``.
"""

from __future__ import annotations

import bisect
import math
from collections.abc import Sequence
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterator

import numpy as np

DIGIT_CHARS = "0123456789abcdefghijklmnopqrstuvwxyz"


def check_base(base) -> int:
    if isinstance(base, bool) or not isinstance(base, (int, np.integer)) or base < 2:
        raise ValueError(f"base must be an integer >= 2, got {base!r}")
    return int(base)


class StreamExhausted(IndexError):
    """Raised when a finite digit literal is read past its end."""


class DigitStream:
    """A base-N digit sequence ``d_1, d_2, ...``.

    Subclasses implement :meth:`digit`; the bulk helpers below fall back to
    per-digit evaluation and are overridden where structure allows.
    """

    base: int
    description: str

    def digit(self, k: int) -> int:
        raise NotImplementedError

    def __iter__(self) -> Iterator[int]:
        k = 1
        while True:
            yield self.digit(k)
            k += 1

    def prefix(self, n: int) -> list[int]:
        return self.digits_array(n).tolist()

    def digits_array(self, n: int) -> np.ndarray:
        """The first ``n`` digits as an int64 array."""
        if n < 0:
            raise ValueError("n must be non-negative")
        out = np.fromiter((self.digit(k) for k in range(1, n + 1)), dtype=np.int64, count=n)
        if n and (out.min() < 0 or out.max() >= self.base):
            raise ValueError(f"{self.description}: digit outside 0..{self.base - 1}")
        return out

    def counts(self, n: int) -> tuple[int, ...]:
        return tuple(int(c) for c in np.bincount(self.digits_array(n), minlength=self.base))

    def counts_array(self, n: int) -> np.ndarray:
        """Running counts, shape ``(base, n)``: ``[l, k]`` is ``N_l(k + 1)``."""
        return running_counts(self.digits_array(n), self.base)

    def __repr__(self) -> str:
        return f"{type(self).__name__}(base={self.base}, {self.description!r})"


def running_counts(digits: np.ndarray, base: int) -> np.ndarray:
    out = np.empty((base, len(digits)), dtype=np.int64)
    for ell in range(base):
        np.cumsum(digits == ell, out=out[ell])
    return out


class BlockStream(DigitStream):
    """Finitely many repeated blocks followed by one block repeated forever.

    ``runs`` is a sequence of ``(block, repetitions)`` pairs.  Periodic,
    rational and synthesized streams are all of this shape, which gives
    O(log runs) digit lookup and prefix counts.
    """

    def __init__(self, base: int, runs, tail, description: str = "blocks"):
        self.base = check_base(base)
        self.description = description
        clean_runs = []
        for block, reps in runs:
            block = tuple(int(d) for d in block)
            reps = int(reps)
            if reps < 0:
                raise ValueError("repetition count must be non-negative")
            if block and reps:
                clean_runs.append((block, reps))
        self.runs = tuple(clean_runs)
        self.tail = tuple(int(d) for d in tail)
        if not self.tail:
            raise ValueError("tail block must be non-empty")
        for block in [b for b, _ in self.runs] + [self.tail]:
            if any(d < 0 or d >= self.base for d in block):
                raise ValueError(f"digit outside 0..{self.base - 1} in block {block}")
        if all(d == 0 for d in self.tail):
            raise ValueError("tail of zeros: the expansion would terminate")
        top = self.base - 1
        if all(d == top for d in self.tail) and all(d == top for b, _ in self.runs for d in b):
            raise ValueError("all digits equal N-1: this is the point 1, not a point of [0, 1)")

        self._ends = []
        self._before = []
        total = 0
        acc = np.zeros(self.base, dtype=object)
        for block, reps in self.runs:
            self._before.append(acc.copy())
            acc = acc + reps * _block_counts(block, self.base)
            total += len(block) * reps
            self._ends.append(total)
        self.head_length = total
        self._head_counts = acc
        self._tail_counts = _block_counts(self.tail, self.base)
        self._tail_prefix = _prefix_table(self.tail, self.base)

    @property
    def period(self) -> int:
        return len(self.tail)

    def digit(self, k: int) -> int:
        if k < 1:
            raise ValueError("digits are indexed from 1")
        if k > self.head_length:
            return self.tail[(k - self.head_length - 1) % len(self.tail)]
        i = bisect.bisect_left(self._ends, k)
        start = self._ends[i - 1] if i else 0
        block = self.runs[i][0]
        return block[(k - start - 1) % len(block)]

    def counts(self, n: int) -> tuple[int, ...]:
        if n < 0:
            raise ValueError("n must be non-negative")
        if n >= self.head_length:
            full, part = divmod(n - self.head_length, len(self.tail))
            c = self._head_counts + full * self._tail_counts + self._tail_prefix[part]
            return tuple(c.tolist())
        i = bisect.bisect_right(self._ends, n)
        start = self._ends[i - 1] if i else 0
        block, _ = self.runs[i]
        full, part = divmod(n - start, len(block))
        c = self._before[i] + full * _block_counts(block, self.base) + _prefix_table(block, self.base)[part]
        return tuple(c.tolist())

    def digits_array(self, n: int) -> np.ndarray:
        if n < 0:
            raise ValueError("n must be non-negative")
        pieces = []
        have = 0
        for block, reps in self.runs:
            if have >= n:
                break
            take = min(reps, -(-(n - have) // len(block)))
            pieces.append(np.tile(np.asarray(block, dtype=np.int64), take))
            have += take * len(block)
        if have < n:
            reps = -(-(n - have) // len(self.tail))
            pieces.append(np.tile(np.asarray(self.tail, dtype=np.int64), reps))
        if not pieces:
            return np.zeros(0, dtype=np.int64)
        return np.concatenate(pieces)[:n]

    def extended(self, block, reps: int, description: str | None = None) -> "BlockStream":
        """A new stream with ``block`` repeated ``reps`` times appended to the head."""
        return BlockStream(self.base, self.runs + ((tuple(block), reps),), block,
                           description or self.description)


def _block_counts(block, base: int) -> np.ndarray:
    c = np.zeros(base, dtype=object)
    for d in block:
        c[d] += 1
    return c


def _prefix_table(block, base: int) -> list[np.ndarray]:
    table = [np.zeros(base, dtype=object)]
    for d in block:
        nxt = table[-1].copy()
        nxt[d] += 1
        table.append(nxt)
    return table


class FunctionStream(DigitStream):
    """Digits from a pure function of the (1-based) index."""

    def __init__(self, base: int, fn: Callable[[int], int], description: str = "function"):
        self.base = check_base(base)
        self.fn = fn
        self.description = description

    def digit(self, k: int) -> int:
        if k < 1:
            raise ValueError("digits are indexed from 1")
        d = int(self.fn(k))
        if not 0 <= d < self.base:
            raise ValueError(f"{self.description}: digit {d} at index {k} outside 0..{self.base - 1}")
        return d


class LiteralStream(DigitStream):
    """A finite prefix-literal, e.g. read from a digit file."""

    def __init__(self, base: int, digits, description: str = "prefix-literal"):
        self.base = check_base(base)
        self.description = description
        self._digits = np.asarray(list(digits) if not isinstance(digits, np.ndarray) else digits,
                                  dtype=np.int64)
        if len(self._digits) and (self._digits.min() < 0 or self._digits.max() >= self.base):
            raise ValueError(f"digit outside 0..{self.base - 1}")

    def __len__(self) -> int:
        return len(self._digits)

    def digit(self, k: int) -> int:
        if k < 1:
            raise ValueError("digits are indexed from 1")
        if k > len(self._digits):
            raise StreamExhausted(f"{self.description} has only {len(self._digits)} digits")
        return int(self._digits[k - 1])

    def digits_array(self, n: int) -> np.ndarray:
        if n > len(self._digits):
            raise StreamExhausted(f"{self.description} has only {len(self._digits)} digits, {n} requested")
        return self._digits[:n].copy()


class RandomStream(DigitStream):
    """Seeded pseudo-random digits; digit k is a pure function of (seed, k)."""

    CHUNK = 1 << 16

    def __init__(self, base: int, seed: int):
        self.base = check_base(base)
        self.seed = int(seed)
        self.description = f"random:{self.seed}"
        self._cache: dict[int, np.ndarray] = {}

    def _chunk(self, c: int) -> np.ndarray:
        arr = self._cache.get(c)
        if arr is None:
            rng = np.random.default_rng([self.seed, c])
            arr = rng.integers(0, self.base, self.CHUNK, dtype=np.int64)
            if len(self._cache) > 64:
                self._cache.clear()
            self._cache[c] = arr
        return arr

    def digit(self, k: int) -> int:
        if k < 1:
            raise ValueError("digits are indexed from 1")
        c, r = divmod(k - 1, self.CHUNK)
        return int(self._chunk(c)[r])

    def digits_array(self, n: int) -> np.ndarray:
        chunks = -(-n // self.CHUNK)
        if chunks == 0:
            return np.zeros(0, dtype=np.int64)
        return np.concatenate([self._chunk(c) for c in range(chunks)])[:n]


def periodic(digits, base: int, description: str | None = None) -> BlockStream:
    digits = tuple(int(d) for d in digits)
    return BlockStream(base, (), digits, description or "periodic:" + "".join(DIGIT_CHARS[d] for d in digits))


def digits_of_rational(p: int, q: int, base: int) -> BlockStream:
    """The non-terminating base-N expansion of ``p/q`` in [0, 1).

    Terminating expansions are rewritten to end in repeating ``N-1``.
    """
    base = check_base(base)
    if q == 0:
        raise ValueError("denominator q must be non-zero")
    if q < 0:
        p, q = -p, -q
    if not 0 <= p < q:
        raise ValueError(f"{p}/{q} is outside [0, 1)")
    if p == 0:
        raise ValueError("0 has only the terminating expansion 0.000...")
    g = math.gcd(p, q)
    p, q = p // g, q // g
    desc = f"rational:{p}/{q}"
    seen: dict[int, int] = {}
    digits: list[int] = []
    r = p
    while r and r not in seen:
        seen[r] = len(digits)
        d, r = divmod(r * base, q)
        digits.append(d)
    if r == 0:
        head = digits[:-1] + [digits[-1] - 1]
        return BlockStream(base, [(head, 1)], (base - 1,), desc)
    start = seen[r]
    return BlockStream(base, [(digits[:start], 1)], digits[start:], desc)


@dataclass(frozen=True)
class CountVector:
    counts: tuple[int, ...]
    n: int

    def __post_init__(self):
        if any(c < 0 for c in self.counts) or sum(self.counts) != self.n:
            raise ValueError(f"counts {self.counts} do not sum to n={self.n}")

    def frequencies(self) -> tuple[Fraction, ...]:
        if self.n == 0:
            raise ValueError("frequencies undefined for n = 0")
        return tuple(Fraction(c, self.n) for c in self.counts)


def count_prefix(stream: DigitStream, n: int) -> CountVector:
    if n < 1:
        raise ValueError("prefix length must be >= 1")
    return CountVector(tuple(stream.counts(n)), n)


def freq_prefix(stream: DigitStream, n: int) -> tuple[Fraction, ...]:
    """The digit-frequency vector of the first ``n`` digits, exactly."""
    if n < 1:
        raise ValueError("prefix length must be >= 1")
    return tuple(Fraction(c, n) for c in stream.counts(n))


class FrequencyTrajectory(Sequence):
    """Lazy view of ``Pi(x, 1), ..., Pi(x, n_max)`` backed by running counts.

    Indexing is 0-based like any sequence (``traj[0]`` is ``Pi(x, 1)``);
    :meth:`at` takes the 1-based prefix length.
    """

    def __init__(self, counts: np.ndarray):
        self.counts = counts

    @property
    def base(self) -> int:
        return self.counts.shape[0]

    def __len__(self) -> int:
        return self.counts.shape[1]

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            return [self[i] for i in range(*idx.indices(len(self)))]
        if idx < 0:
            idx += len(self)
        if not 0 <= idx < len(self):
            raise IndexError(idx)
        n = idx + 1
        return tuple(Fraction(int(c), n) for c in self.counts[:, idx])

    def at(self, n: int) -> tuple[Fraction, ...]:
        if not 1 <= n <= len(self):
            raise IndexError(n)
        return self[n - 1]

    def count_vector(self, n: int) -> CountVector:
        return CountVector(tuple(int(c) for c in self.counts[:, n - 1]), n)


def freq_trajectory(stream: DigitStream, n_max: int) -> FrequencyTrajectory:
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    return FrequencyTrajectory(stream.counts_array(n_max))


def check_nonterminating_prefix(stream: DigitStream, length: int) -> bool:
    """Spot check on a finite prefix: not all zeros and not all N-1."""
    d = stream.digits_array(length)
    return not (np.all(d == 0) or np.all(d == stream.base - 1))


def parse_stream(literal: str, base: int) -> DigitStream:
    """Build a stream from ``periodic:<digits>``, ``rational:<p>/<q>``,
    ``random:<seed>`` or ``file:<path>``."""
    base = check_base(base)
    kind, sep, arg = literal.partition(":")
    if not sep:
        raise ValueError(f"stream literal needs a kind prefix: {literal!r}")
    if kind == "periodic":
        if not arg:
            raise ValueError("empty periodic block")
        return periodic([_digit_value(ch, base) for ch in arg], base)
    if kind == "rational":
        p, slash, q = arg.partition("/")
        if not slash:
            raise ValueError(f"rational literal must be p/q: {arg!r}")
        return digits_of_rational(int(p), int(q), base)
    if kind == "random":
        return RandomStream(base, int(arg))
    if kind == "file":
        return read_digit_file(arg, base)
    raise ValueError(f"unknown stream kind {kind!r}")


def _digit_value(ch: str, base: int) -> int:
    v = DIGIT_CHARS.find(ch.lower())
    if v < 0 or v >= base:
        raise ValueError(f"invalid digit {ch!r} for base {base}")
    return v


def read_digit_file(path, base: int) -> LiteralStream:
    raw = Path(path).read_bytes().strip()
    text = raw.decode("ascii")
    return LiteralStream(base, [_digit_value(ch, base) for ch in text], f"file:{path}")


def write_digit_file(path, digits: np.ndarray, base: int) -> None:
    if base > len(DIGIT_CHARS):
        raise ValueError(f"digit files support bases up to {len(DIGIT_CHARS)}")
    table = np.frombuffer(DIGIT_CHARS.encode("ascii"), dtype=np.uint8)
    Path(path).write_bytes(table[np.asarray(digits, dtype=np.int64)].tobytes())
