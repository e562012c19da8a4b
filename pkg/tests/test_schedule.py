from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from summatrix.digits import CountVector, freq_trajectory, periodic
from summatrix.schedule import (ConstantUnavailable, PropertyPQuery, PsiFunction, Refutation, Witness,
                                WindowExceedsHorizon, build_psi, check_property_P, compute_constants,
                                find_j, psi_from_text, square_plus_one)
from summatrix.simplex import block_for, l1_distance, parse_target
from summatrix.transforms import Transform, cesaro, holder, identity, weighted

F = Fraction


def tail_oracle(t, m, h):
    """Least M with sum_{n >= M} |c_{m,n}| <= 1/(12h), summing forward from each candidate."""
    row = [abs(t.c(m, n)) for n in range(1, m + 1)]
    for M in range(1, m + 2):
        if sum(row[M - 1:], F(0)) <= F(1, 12 * h):
            return M


def test_cesaro_constant_examples():
    c = compute_constants(cesaro(), 1)
    assert c.M(100) == 93
    assert c.N(1) == 2048
    assert c.K == 0
    assert compute_constants(cesaro(), 2).N(1) == 4096


@pytest.mark.parametrize("t", [cesaro(), identity(), holder(2), weighted("1/n")], ids=lambda t: t.name)
@pytest.mark.parametrize("h", [1, 2])
def test_tail_index_is_minimal(t, h):
    c = compute_constants(t, h, m_range=60)
    for m in (1, 2, 3, 13, 24, 25, 59, 60):
        M = c.M(m)
        assert M == tail_oracle(t, m, h)
        tail = sum((abs(t.c(m, n)) for n in range(M, m + 1)), F(0))
        assert tail <= F(1, 12 * h)
        if M > 1:
            assert tail + abs(t.c(m, M - 1)) > F(1, 12 * h)


def test_column_index_is_minimal():
    for t, h in ((cesaro(), 1), (identity(), 3), (holder(2), 1)):
        c = compute_constants(t, h, n_range=2)
        for n in (1, 2):
            N = c.N(n)
            thr = F(1, 2 ** (n + 10) * h)
            assert all(abs(t.c(m, n)) < thr for m in range(N + 1, N + 300))
            if N >= 1:
                assert abs(t.c(N, n)) >= thr


def test_constants_refuse_uncertifiable_rows():
    # infinite rows with no tail certificate cannot even be built
    with pytest.raises(ValueError):
        Transform("endless", lambda m, n: F(1, 2 ** n), 1)
    stuck = Transform("stuck", lambda m, n: F(1) if n == 1 else F(0), 1, last_index=lambda m: 1,
                      column_limit=lambda n: F(1) if n == 1 else F(0), monotone_from=lambda n: 1)
    with pytest.raises(ConstantUnavailable):
        compute_constants(stuck, 1).N(1)


def test_psi_examples():
    psi = build_psi(compute_constants(cesaro(), 1))
    assert psi(0) == 2
    assert psi(1) == 2053
    assert square_plus_one()(3) == 10


def test_psi_invariants_with_big_integers():
    c = compute_constants(cesaro(), 1)
    psi = build_psi(c)
    values = [psi(n) for n in range(0, 65)]
    assert values[64] > 2**74
    for n in range(1, 65):
        assert values[n] == c.M(n) + c.N(n) + n * n + values[n - 1]
        assert values[n] > values[n - 1]
        assert values[n] > max(n * n, c.M(n), c.N(n), c.K) + 1


def test_psi_overrides_are_checked():
    assert psi_from_text("n ** 2 + 1")(4) == 17
    assert psi_from_text("2n")(0) == 1
    with pytest.raises(ValueError):
        psi_from_text("log n")
    flat = PsiFunction.from_callable(lambda n: 5)
    flat(3)
    with pytest.raises(ValueError):
        flat(4)
    with pytest.raises(ValueError):
        PsiFunction.from_callable(lambda n: n)(2)


def test_find_j_examples():
    q = parse_target("1/3,2/3")
    prefix = CountVector((1, 2), 3)
    psi = square_plus_one()
    assert find_j(q, block_for(q), prefix, 2, 1, psi) == 32
    assert find_j(q, block_for(q), prefix, 1, 1, psi) == 16
    assert find_j(q, block_for(q), prefix, 2, 100, psi) == 100


targets = st.sampled_from(["1/3,2/3", "1/2,1/2", "3/4,1/4", "1/5,2/5,2/5", "1/2,1/4,1/4"]).map(parse_target)


def _prefix(q, data):
    digits = data.draw(st.lists(st.integers(0, q.base - 1), max_size=30))
    return CountVector(tuple(digits.count(d) for d in range(q.base)), len(digits))


@given(targets, st.integers(1, 6), st.integers(1, 80), st.data())
@settings(max_examples=60)
def test_find_j_conditions_and_monotonicity(q, h, i, data):
    prefix = _prefix(q, data)
    psi = square_plus_one()
    block = block_for(q)
    j = find_j(q, block, prefix, h, i, psi)
    bound = q.base * max(z * (2 + F(prefix.n, block.s)) + y for z, y in zip(block.counts, prefix.counts))
    assert j >= max(i, prefix.n) and j >= h * bound
    assert h * j < psi(j)
    # minimality: j - 1 breaks one of the two conditions
    assert j - 1 < max(i, prefix.n, h * bound) or h * (j - 1) >= psi(j - 1)
    assert find_j(q, block, prefix, h, i + 1, psi) >= j
    assert find_j(q, block, prefix, h + 1, i, psi) >= j


def brute_window_ok(stream, q, h, lo, hi):
    counts = [0] * q.base
    for n in range(1, hi + 1):
        counts[stream.digit(n)] += 1
        if n >= lo and l1_distance([F(c, n) for c in counts], q.entries) >= F(1, h):
            return False
    return True


def test_property_P_on_converging_stream():
    s = periodic([0, 1, 1], 2)
    q = parse_target("1/3,2/3")
    traj = freq_trajectory(s, 2000)
    query = PropertyPQuery(1, 1, q, 3, square_plus_one())
    w = check_property_P(traj, query, 2000)
    assert isinstance(w, Witness)
    assert (w.j, w.window) == (5, (5, 26))
    assert w.max_distance_seen == F(4, 21)
    assert 3 * w.j <= query.psi(w.j)
    assert brute_window_ok(s, q, 3, *w.window)
    # least: every earlier start fails somewhere or breaks h*j <= psi(j)
    for j in range(1, w.j):
        assert 3 * j > query.psi(j) or not brute_window_ok(s, q, 3, j, query.psi(j))


@given(st.lists(st.integers(0, 2), min_size=1, max_size=8), st.integers(1, 6), st.integers(1, 30),
       st.integers(1, 2))
@settings(max_examples=40)
def test_property_P_witnesses_reverify(digits, h, i, m):
    s = periodic(digits + [0, 1, 2], 3)
    q = parse_target("1/3,1/3,1/3")
    traj = freq_trajectory(s, 3000)
    query = PropertyPQuery(i, m, q, h, square_plus_one())
    res = check_property_P(traj, query, 3000, cap=3000)
    if isinstance(res, Witness):
        assert res.j >= i
        hi = min(res.window[1], 3000)
        assert brute_window_ok(s, q, h, res.j, hi)
        assert res.truncated == (res.window[1] > 3000)


def test_constant_trajectory():
    q = parse_target("1/4,3/4")
    traj = [q.entries] * 500
    for i, h in ((1, 3), (7, 2), (2, 9)):
        w = check_property_P(traj, PropertyPQuery(i, 1, q, h, square_plus_one()), 500, cap=500)
        assert isinstance(w, Witness)
        assert i <= w.j <= max(i, h)
        assert w.max_distance_seen == 0


def test_refutation_at_horizon():
    traj = freq_trajectory(periodic([0, 1], 2), 1000)
    res = check_property_P(traj, PropertyPQuery(1, 1, parse_target("1/3,2/3"), 100, square_plus_one()), 1000, cap=1000)
    assert isinstance(res, Refutation)
    assert res.to_json()["refuted_at_horizon"] is True


def test_window_past_horizon_needs_cap():
    traj = freq_trajectory(periodic([0, 1], 2), 50)
    query = PropertyPQuery(1, 3, parse_target("1/2,1/2"), 1, square_plus_one())
    with pytest.raises(WindowExceedsHorizon):
        check_property_P(traj, query, 50)
    w = check_property_P(traj, query, 50, cap=50)
    assert w.truncated and w.verified_up_to == 50


def test_explicit_windows():
    s = periodic([0, 1], 2)
    traj = freq_trajectory(s, 400)
    q = parse_target("1/2,1/2")
    # distance at odd n is 1/n, so windows starting below 4 fail for h = 4
    query = PropertyPQuery(1, 1, q, 4, windows=((1, 10), (3, 30), (5, 200)))
    w = check_property_P(traj, query, 400)
    assert w.window == (5, 200)
    assert brute_window_ok(s, q, 4, 5, 200)
    with pytest.raises(ValueError):
        PropertyPQuery(1, 1, q, 4)
    with pytest.raises(ValueError):
        PropertyPQuery(0, 1, q, 4, square_plus_one())
