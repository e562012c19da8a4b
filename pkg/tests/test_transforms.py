from __future__ import annotations

import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from summatrix.digits import freq_prefix, periodic
from summatrix.enclosure import Enclosure, apply_certified, frequency_enclosures
from summatrix.transforms import (ContractBreach, PrefixTooShort, SpecError, Transform, apply_transform,
                                  averaged_freq, averaged_freq_table, cesaro, exact_apply_all, holder,
                                  identity, matrix, scaled, silverman_toeplitz_audit,
                                  transform_from_spec, weighted)

F = Fraction


def geometric_rows() -> Transform:
    """c_{m,n} = 2^-n / 2 on every row: infinite support, row sums 1/2."""

    def tail(m, eps):
        # sum_{n >= M} 2^-n / 2 = 2^-M <= eps
        return max(1, math.ceil(math.log2(1 / eps)) + 1)

    return Transform("geometric", lambda m, n: F(1, 2 ** (n + 1)), F(1, 2), tail_bound=tail, nonnegative=True)


def cesaro_power(k: int, size: int) -> list[list[Fraction]]:
    """Oracle: the k-th power of the size x size Cesàro matrix by plain products."""
    C = [[F(1, m) if n <= m else F(0) for n in range(1, size + 1)] for m in range(1, size + 1)]
    P = C
    for _ in range(k - 1):
        P = [[sum((P[i][l] * C[l][j] for l in range(size)), F(0)) for j in range(size)] for i in range(size)]
    return P


def test_cesaro_examples():
    c = cesaro()
    assert c.c(3, 2) == F(1, 3)
    assert c.c(2, 5) == 0


def test_holder_examples_and_products():
    assert holder(2).c(2, 2) == F(1, 4)
    for k in (2, 3, 4):
        P = cesaro_power(k, 9)
        t = holder(k)
        assert all(t.c(m, n) == P[m - 1][n - 1] for m in range(1, 10) for n in range(1, 10))


def test_holder_one_is_cesaro():
    a, b = holder(1), cesaro()
    assert all(a.c(m, n) == b.c(m, n) for m in range(1, 201) for n in range(1, 201))


@pytest.mark.parametrize("k", [2, 3])
def test_holder_monotone_certificate(k):
    t = holder(k)
    for n in (1, 2, 4):
        start = t.monotone_from(n)
        col = [t.c(m, n) for m in range(start, start + 150)]
        assert all(a >= b for a, b in zip(col, col[1:]))


def test_weighted_definitions():
    t = weighted("1/n")
    assert t.c(3, 2) == F(1, 2) / (1 + F(1, 2) + F(1, 3))
    assert weighted("1").c(4, 1) == cesaro().c(4, 1)
    assert weighted("n").c(3, 3) == F(3, 6)
    assert weighted(["1", "2"]).c(3, 2) == F(2, 4)
    for bad in (["0"], [], "2^n", ["-1"]):
        with pytest.raises(SpecError):
            weighted(bad)


def test_spec_parsing_errors_name_the_field():
    with pytest.raises(SpecError, match="'k'"):
        transform_from_spec({"kind": "holder"})
    with pytest.raises(SpecError, match="'k'"):
        transform_from_spec({"kind": "holder", "k": 0})
    with pytest.raises(SpecError, match="kind"):
        transform_from_spec({"kind": "abel"})
    with pytest.raises(SpecError, match="rows"):
        transform_from_spec({"kind": "matrix"})
    t = transform_from_spec({"kind": "scaled", "factor": "2", "of": {"kind": "cesaro"}})
    assert t.c(4, 1) == F(1, 2)
    assert transform_from_spec(t.to_spec()).c(4, 1) == F(1, 2)


def test_apply_examples():
    c = cesaro()
    r = apply_transform(c, [1, 0, 1, 0], 4)
    assert (r.value, r.truncation_error_bound) == (F(1, 2), 0)
    assert apply_transform(identity(), [F(5, 7), F(2, 9), 3], 2, bound=3).value == F(2, 9)
    r = apply_transform(c, [0, F(1, 2), F(1, 3), F(1, 2)], 4)
    assert (r.value, r.truncation_error_bound) == (F(1, 3), 0)
    with pytest.raises(PrefixTooShort):
        apply_transform(c, [1, 1], 3)
    with pytest.raises(ValueError):
        apply_transform(c, [1, 5, 1], 3, bound=1)


def test_averaged_freq_examples():
    assert averaged_freq(cesaro(), periodic([0, 1], 2), 4).entries == (F(2, 3), F(1, 3))
    assert averaged_freq(cesaro(), periodic([0, 1, 1], 2), 3).entries == (F(11, 18), F(7, 18))


def test_identity_matches_frequencies():
    rng = random.Random(3)
    for N in (2, 3, 5):
        s = periodic([rng.randrange(N) for _ in range(11)] + [1], N)
        for m in range(1, 400):
            assert averaged_freq(identity(), s, m).entries == freq_prefix(s, m)


@pytest.mark.parametrize("t", [cesaro(), holder(2), holder(3), weighted("1/n"), weighted(["1", "5/2"]), identity()],
                         ids=lambda t: t.name)
def test_constant_sequences_are_fixed(t):
    for c in (F(3, 7), F(-2), F(0)):
        out = exact_apply_all(t, [c] * 60, 60)
        assert out == [c] * 60


@given(st.integers(2, 4).flatmap(lambda N: st.lists(st.integers(0, N - 1), min_size=1, max_size=9).map(lambda d: (N, d))),
       st.integers(1, 60))
@settings(max_examples=40)
def test_simplex_preserved(spec, m):
    N, digits = spec
    s = periodic(digits + [0, N - 1], N)
    for t in (cesaro(), holder(2), weighted("n"), weighted("1/n")):
        e = averaged_freq(t, s, m).entries
        assert sum(e) == 1 and min(e) >= 0


def test_truncation_finite_rows_is_exact():
    s = [F(k % 3, 5) for k in range(1, 41)]
    for m in (1, 7, 40):
        brute = sum((cesaro().c(m, n) * s[n - 1] for n in range(1, 41)), F(0))
        for eps in (F(1, 2), F(1, 10**6)):
            assert apply_transform(cesaro(), s, m, eps).value == brute


def test_truncation_infinite_rows_within_eps():
    t = geometric_rows()
    rng = random.Random(9)
    for _ in range(100):
        m = rng.randint(1, 50)
        eps = F(1, rng.randint(2, 10**6))
        # s_n = (-1)^n: full value sum_n (1/2)(-1/2)^n = -1/6
        need = t.row_end(m, eps)
        s = [F((-1) ** n) for n in range(1, need + 1)]
        r = apply_transform(t, s, m, eps)
        assert r.truncation_error_bound == eps
        assert abs(r.value - F(-1, 6)) <= eps


def test_audit_examples():
    rep = silverman_toeplitz_audit(cesaro(), 300, 20, 4)
    assert [c.status for c in rep.conditions] == ["pass", "inconclusive", "pass"]
    assert rep.condition1.exact and rep.condition3.exact
    assert rep.summary() == "conditions 1,3 pass (exact); condition 2 evidence at horizon"
    doubled = silverman_toeplitz_audit(scaled(2, cesaro()), 300, 20, 4)
    assert doubled.condition3.status == "fail"
    spike = silverman_toeplitz_audit(matrix([[1]], repeat_last=True), 300, 20, 4)
    assert spike.condition2.status == "fail"
    assert spike.failed


def test_audit_identity_columns_vanish():
    rep = silverman_toeplitz_audit(identity(), 100, 30, 2)
    assert rep.condition2.status == "pass"
    assert not rep.failed


def test_audit_row_bound_violation():
    liar = Transform("liar", lambda m, n: F(1, m) if n <= m else F(0), F(1, 2), last_index=lambda m: m,
                     nonnegative=True, lower_triangular=True)
    assert silverman_toeplitz_audit(liar, 50, 5, 1).condition1.status == "fail"


def test_contract_breaches():
    leaky = Transform("leaky", lambda m, n: F(1, m + 1) if n <= m + 1 else F(0), 1, last_index=lambda m: m)
    with pytest.raises(ContractBreach):
        silverman_toeplitz_audit(leaky, 10, 3, 1)
    optimistic = Transform("optimistic", lambda m, n: F(1, 2 ** n), 1, tail_bound=lambda m, eps: 2)
    with pytest.raises(ContractBreach):
        silverman_toeplitz_audit(optimistic, 10, 3, 1)


def test_audit_infinite_rows():
    rep = silverman_toeplitz_audit(geometric_rows(), 20, 5, 4)
    # rows sum to about 1/2, well outside the 1/8 band; the bound M = 1/2 is met only up to the tail
    assert rep.condition3.status == "fail"
    assert rep.condition1.status == "inconclusive"


def test_frequency_table_matches_scalar_path():
    s = periodic([0, 2, 1, 1, 0, 2, 2], 3)
    for t in (identity(), cesaro(), holder(2), weighted("1/n")):
        tab = averaged_freq_table(t, s, 120)
        assert tab.sums_to_one().all() and tab.nonnegative().all()
        for m in (1, 2, 33, 120):
            assert tab.entries(m) == averaged_freq(t, s, m).entries


@given(st.lists(st.integers(0, 1), min_size=1, max_size=7), st.sampled_from(
    [identity(), cesaro(), holder(2), weighted("1/n"), weighted(["2", "1/3"]), scaled(F(-1, 3), cesaro()),
     matrix([[1, 2], ["1/3", 0, "1/5"]], repeat_last=True)]))
@settings(max_examples=30)
def test_enclosures_contain_exact_values(digits, t):
    s = periodic(digits + [0, 1], 2)
    counts = s.counts_array(150)
    encs = [apply_certified(t, f, 150) for f in frequency_enclosures(counts)]
    for r in (1, 2, 3, 50, 149, 150):
        exact = averaged_freq(t, s, r).entries
        for enc, x in zip(encs, exact):
            lo, hi = enc.interval(r)
            assert lo <= x <= hi
            assert hi - lo <= F(1, 2**50)


def test_enclosure_infinite_rows():
    t = geometric_rows()
    x = Enclosure.constant(1, 80)
    out = apply_certified(t, x, 5, eps=F(1, 2**30))
    for r in range(1, 6):
        lo, hi = out.interval(r)
        assert lo <= F(1, 2) <= hi
