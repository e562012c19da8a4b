from __future__ import annotations

import json
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from summatrix.digits import LiteralStream, periodic
from summatrix.rational import parse_fraction
from summatrix.schedule import square_plus_one
from summatrix.simplex import block_for, l1_distance, parse_target, parse_targets
from summatrix.synthesis import (Phase, Schedule, perturbations, schedule_from_json, synthesize_dense_point,
                                 synthesize_for_transform, synthesize_property_P, trace_rows,
                                 triangle_transfer, verify_accumulation, verify_dense_bound)
from summatrix.transforms import SpecError, averaged_freq, cesaro, holder, identity

F = Fraction


def within_raw(stream, q, h, lo, hi):
    """Integer-only check that ||Pi(n) - q||_1 < 1/h for lo <= n <= hi."""
    den = q.denominator
    Q = q.numerators
    counts = [0] * q.base
    for n in range(1, hi + 1):
        counts[stream.digit(n)] += 1
        if n >= lo and h * sum(abs(den * c - Ql * n) for c, Ql in zip(counts, Q)) >= den * n:
            return False
    return True


def cesaro_oracle(digits, base, r_max):
    """Exact Cesàro means of the frequency vectors by running Fraction sums."""
    counts = [0] * base
    acc = [F(0)] * base
    out = []
    for n, d in enumerate(digits[:r_max], start=1):
        counts[d] += 1
        acc = [a + F(c, n) for a, c in zip(acc, counts)]
        out.append(tuple(a / n for a in acc))
    return out


def test_dense_point_examples():
    assert synthesize_dense_point([1, 1, 0], parse_target("1/3,2/3")).prefix(12) == [1, 1, 0, 0, 1, 1, 0, 1, 1, 0, 1, 1]
    assert synthesize_dense_point([], parse_target("1/2,1/2")).prefix(4) == [0, 1, 0, 1]
    assert synthesize_dense_point([2], parse_target("1/2,1/4,1/4")).prefix(9) == [2, 0, 0, 1, 2, 0, 0, 1, 2]
    with pytest.raises(ValueError):
        synthesize_dense_point([3], parse_target("1/2,1/2"))


def test_dense_bound_examples():
    q = parse_target("1/3,2/3")
    y = synthesize_dense_point([1, 1, 0], q)
    rep = verify_dense_bound(y, q, 2, 1, square_plus_one(), 2, 10**6)
    assert rep.j == 32 and rep.window == (32, 1050626) and rep.checked_up_to == 10**6
    assert rep.max_distance < F(1, 2)
    assert verify_dense_bound(y, q, 1, 1, square_plus_one(), 2, 10**5).j == 16
    assert within_raw(y, q, 2, 32, 5000)


@pytest.mark.parametrize("h", [1, 2, 5, 11])
def test_dense_bound_balanced_target(h):
    q = parse_target("1/2,1/2")
    y = synthesize_dense_point([], q)
    rep = verify_dense_bound(y, q, h, 1, square_plus_one(), 1, 20_000)
    assert rep.j == 4 * h
    # odd n sit at distance exactly 1/n
    assert rep.max_distance == F(1, 4 * h + 1)


@given(st.lists(st.integers(0, 1), max_size=12), st.sampled_from(["1/3,2/3", "3/4,1/4", "2/5,3/5"]))
@settings(max_examples=25)
def test_dense_point_converges_at_rate_c_over_k(prefix, text):
    q = parse_target(text)
    block = block_for(q)
    y = synthesize_dense_point(prefix, q)
    t, s = len(prefix), block.s
    ycounts = [prefix.count(d) for d in range(2)]
    C = F(sum(abs(s * yl - t * zl) for yl, zl in zip(ycounts, block.counts)), s * s)
    counts = y.counts_array(t + 1000 * s)
    for k in range(1, 1001):
        n = t + k * s
        dist = l1_distance([F(int(c), n) for c in counts[:, n - 1]], q.entries)
        assert dist <= C / k


def test_property_P_two_phase_example():
    sched = Schedule((Phase(parse_target("3/4,1/4"), 4), Phase(parse_target("1/4,3/4"), 4)))
    stream, rep = synthesize_property_P(2, sched, square_plus_one(), 10**5)
    assert [p.complete for p in rep.phases] == [True, True]
    assert rep.all_phases_realized(sched)
    for p in rep.phases:
        lo, hi = p.raw_window
        assert hi == lo * lo + 1
        assert p.raw_max_distance < F(1, 4)
        assert within_raw(stream, p.q, 4, lo, min(hi, 10**5))


def test_single_balanced_phase_is_periodic():
    stream, rep = synthesize_property_P(2, Schedule((Phase(parse_target("1/2,1/2"), 2),)), square_plus_one(), 1000)
    assert stream.prefix(200) == [0, 1] * 100
    assert rep.phases[0].complete and rep.phases[0].raw_window[0] == 8


def test_exhausted_horizon():
    sched = Schedule((Phase(parse_target("1/3,2/3"), 10**4),))
    stream, rep = synthesize_property_P(2, sched, square_plus_one(), 1000)
    assert rep.exhausted and not rep.all_phases_realized(sched)
    assert "beyond the horizon" in rep.phases[0].note
    # still a total, non-terminating stream
    assert len(stream.prefix(50)) == 50


def test_identity_windows_coincide():
    sched = Schedule((Phase(parse_target("3/4,1/4"), 3), Phase(parse_target("1/3,2/3"), 3)), repeat=True)
    stream, rep = synthesize_for_transform(identity(), 2, sched, 20_000)
    assert rep.completed
    for p in rep.completed:
        assert p.averaged_window == p.raw_window
        for smp in p.samples:
            assert smp.head == 0
            exact = l1_distance(stream_freq(stream, smp.r), p.q.entries)
            assert smp.actual_lo <= exact <= smp.actual_hi


def stream_freq(stream, n):
    return tuple(F(c, n) for c in stream.counts(n))


def test_cesaro_single_phase():
    sched = Schedule((Phase(parse_target("1/3,2/3"), 3),))
    stream, rep = synthesize_for_transform(cesaro(), 2, sched, 10**5)
    p = rep.phases[0]
    assert p.complete
    a, b = p.averaged_window
    means = cesaro_oracle(stream.prefix(b), 2, b)
    for r in range(a, b + 1):
        assert l1_distance(means[r - 1], p.q.entries) <= F(1, 3)
    # raw frequencies of a periodic "011"-type stream converge, and so do their means
    tail = cesaro_oracle(periodic([0, 1, 1], 2).prefix(3000), 2, 3000)
    last_bad = max(r for r in range(1, 3001) if l1_distance(tail[r - 1], p.q.entries) >= F(1, 3))
    assert last_bad < 100
    assert all(smp.within(3) and smp.dominates() for smp in p.samples)


def test_cesaro_cycled_schedule_small():
    sched = schedule_from_json({"phases": [{"q": ["3/4", "1/4"], "h": 5}, {"q": ["1/4", "3/4"], "h": 5}],
                                "repeat": True})
    stream, rep = synthesize_for_transform(cesaro(), 2, sched, 50_000)
    assert len(rep.completed) >= 2
    windows = [p.averaged_window for p in rep.completed]
    assert all(w1[1] < w2[0] for w1, w2 in zip(windows, windows[1:]))
    last = windows[-1][1]
    means = cesaro_oracle(stream.prefix(last), 2, last)
    for p in rep.completed:
        for r in set(p.averaged_window):
            assert l1_distance(means[r - 1], p.q.entries) <= F(1, 5)


def test_holder_synthesis_decomposition():
    sched = Schedule((Phase(parse_target("2/3,1/3"), 2),))
    stream, rep = synthesize_for_transform(holder(2), 2, sched, 20_000)
    p = rep.phases[0]
    assert p.complete and p.samples
    a, b = p.averaged_window
    for r in (a, b):
        exact = averaged_freq(holder(2), stream, r).entries
        assert l1_distance(exact, p.q.entries) <= F(1, 2)


def test_verify_accumulation_examples():
    s = periodic([0, 1], 2)
    ok = verify_accumulation(s, identity(), [parse_target("1/2,1/2")], 10, 100, min_hits=3)
    assert ok.passed
    hits = ok.targets[0].hits.tolist()
    assert all(r in hits for r in range(2, 101, 2))
    assert all(r % 2 == 0 or r >= 10 for r in hits)
    assert [c.distance for c in ok.targets[0].confirmed] == [0, 0, 0]
    bad = verify_accumulation(s, identity(), [parse_target("1/3,2/3")], 100, 100)
    assert not bad.passed and bad.targets[0].count == 0


def test_hits_agree_with_oracle():
    digits = [0, 0, 0, 1, 1, 0, 1, 1, 1, 1] * 30 + [0, 1] * 50
    stream = LiteralStream(2, digits)
    targets = parse_targets("3/4,1/4;1/2,1/2")
    rep = verify_accumulation(stream, cesaro(), targets, 6, 400)
    means = cesaro_oracle(digits, 2, 400)
    for tgt in rep.targets:
        expected = [r for r in range(1, 401) if l1_distance(means[r - 1], tgt.q.entries) <= F(1, 6)]
        assert tgt.hits.tolist() == expected
        assert tgt.undecided == []


def test_monotone_refinement():
    stream = LiteralStream(2, ([0] * 7 + [1] * 13) * 200)
    targets = parse_targets("1/3,2/3;1/2,1/2")
    small = verify_accumulation(stream, holder(2), targets, 8, 1500)
    large = verify_accumulation(stream, holder(2), targets, 8, 4000)
    for a, b in zip(small.targets, large.targets):
        assert set(a.hits.tolist()) <= set(b.hits.tolist())
        assert b.hits.tolist()[:a.count] == a.hits.tolist()


@given(st.sampled_from(["1/3,2/3", "1/2,1/4,1/4", "1/10,9/10"]), st.integers(1, 40), st.integers(0, 99))
def test_perturbations_stay_close(text, k, seed):
    q = parse_target(text)
    for p in perturbations(q, k, 4, seed):
        assert sum(p) == 1 and min(p) >= 0
        assert l1_distance(p, q.entries) <= F(1, k)


def test_triangle_transfer():
    s = periodic([0, 1], 2)
    rep = verify_accumulation(s, cesaro(), [parse_target("1/2,1/2")], 10, 2000, min_hits=5)
    chk = triangle_transfer(rep, 10)
    assert chk.passed and chk.checked >= rep.targets[0].count
    assert chk.worst <= F(2, 10)


def test_schedule_json_errors():
    for bad, field in ((5, "list"), ([{"h": 2}], "'q'"), ([{"q": ["1/2", "1/2"]}], "'h'"),
                       ([{"q": ["1/2", "1/2"], "h": 0}], "'h'"), ([{"q": ["1/2", "1/3"], "h": 1}], "'q'"),
                       ({"phases": []}, "at least one"),
                       ([{"q": ["1/2", "1/2"], "h": 1}, {"q": ["1/3", "1/3", "1/3"], "h": 1}], "dimensions")):
        with pytest.raises(SpecError, match=field):
            schedule_from_json(bad)
    sched = schedule_from_json([{"q": ["1/2", "1/2"], "h": 1, "repeat": True}])
    assert sched.repeat


def test_reports_serialize_and_round_trip():
    sched = Schedule((Phase(parse_target("3/4,1/4"), 3),))
    stream, rep = synthesize_for_transform(cesaro(), 2, sched, 5000)
    back = json.loads(json.dumps(rep.to_json()))
    ph = back["phases"][0]
    assert parse_fraction(ph["raw_max_distance"]) == rep.phases[0].raw_max_distance
    assert parse_fraction(ph["raw_tolerance"]) == F(1, 18)
    acc = verify_accumulation(stream, cesaro(), [sched.phases[0].q], 3, 1000)
    j = json.loads(json.dumps(acc.to_json()))
    assert j["targets"][0]["hit_count"] == acc.targets[0].count
    for c in j["targets"][0]["confirmed"]:
        exact = averaged_freq(cesaro(), stream, c["r"]).entries
        assert [parse_fraction(x) for x in c["freqT"]] == list(exact)


def test_trace_rows_exact_columns():
    stream = periodic([0, 1, 1], 2)
    rep = verify_accumulation(stream, cesaro(), [parse_target("1/3,2/3")], 4, 600)
    header, rows = trace_rows(rep, stream, cesaro(), exact_upto=50)
    assert header[:4] == ["r", "dist_to_target_1", "freqT_0", "freqT_1"]
    for row in rows:
        r = int(row[0])
        exact_cols = row[4:]
        if r <= 50:
            exact = averaged_freq(cesaro(), stream, r).entries
            assert [parse_fraction(x) for x in exact_cols[1:]] == list(exact)
            assert abs(F(row[2]) - exact[0]) <= F(1, 10**12)
        assert len(row) == len(header)
