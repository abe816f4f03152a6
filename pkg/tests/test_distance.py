import itertools
import random

import pytest
from hypothesis import given, strategies as st

from finch.distance import (
    DEFAULT_K,
    DistanceBitmap,
    DistanceMode,
    Normalization,
    Relation,
    branch_distance,
    normalize,
    record,
    to_unsigned,
)

ABS, XOR = DistanceMode.ABS, DistanceMode.XOR
u64 = st.integers(min_value=0, max_value=2**64 - 1)


@pytest.mark.parametrize(
    "rel,a,b,mode,expected",
    [
        (Relation.EQ, 33686036, 3735928558, ABS, 3702242522),
        (Relation.EQ, 0xDEADBEEA, 0xDEADBEEE, ABS, 4),
        (Relation.EQ, 13, 8, ABS, 5),
        (Relation.EQ, 0b1010, 0b0110, XOR, 0b1100),
        (Relation.TRUE, 5, 9, ABS, 0),
        (Relation.FALSE, 5, 9, XOR, 0),
    ],
)
def test_branch_distance_examples(rel, a, b, mode, expected):
    assert branch_distance(rel, a, b, mode) == expected


def test_zero_iff_equal_exhaustive_8bit():
    for a, b in itertools.product(range(256), repeat=2):
        for mode in (ABS, XOR):
            assert (branch_distance(Relation.EQ, a, b, mode) == 0) == (a == b)


@given(u64, u64)
def test_zero_iff_equal_64bit(a, b):
    for mode in (ABS, XOR):
        assert (branch_distance(Relation.EQ, a, b, mode) == 0) == (a == b)
    assert branch_distance(Relation.EQ, a, a, ABS) == 0
    assert branch_distance(Relation.EQ, a, a, XOR) == 0


@given(st.sampled_from(list(Relation)), u64, u64)
def test_abs_symmetric(rel, a, b):
    assert branch_distance(rel, a, b, ABS) == branch_distance(rel, b, a, ABS)


def test_record_min_merge():
    bm = DistanceBitmap()
    record(bm, 3, 5)
    assert bm.entries == {3: 5}
    record(bm, 3, 9)
    assert bm.entries == {3: 5}
    bm2 = DistanceBitmap({3: 9})
    record(bm2, 3, 5)
    assert bm2.entries == {3: 5}


def test_record_caps_at_k():
    bm = DistanceBitmap(k=100)
    bm.record(1, 10**9)
    assert bm.get(1) == 100
    assert bm.get(2) == 100


@given(st.lists(st.tuples(st.integers(0, 6), st.integers(0, 1000)), max_size=30), st.randoms())
def test_record_order_insensitive_and_idempotent(events, rnd):
    a = DistanceBitmap()
    for s, d in events:
        a.record(s, d)
    shuffled = list(events)
    rnd.shuffle(shuffled)
    b = DistanceBitmap()
    for s, d in shuffled:
        b.record(s, d)
        b.record(s, d)
    assert a == b


def test_normalize_examples():
    assert normalize(DistanceBitmap({1: 5}), [1]) == [5 / (2**32 - 1)]
    assert normalize(DistanceBitmap({}), [7]) == [1.0]
    # 3702242522 / 4294967295 evaluated with mpmath at 30 digits
    (v,) = normalize(DistanceBitmap({4: 3702242522}), [4])
    assert v == pytest.approx(0.861995509560684559, abs=1e-15)
    assert normalize(DistanceBitmap({1: 5}), []) == []


@given(st.dictionaries(st.integers(0, 10), st.integers(0, DEFAULT_K), max_size=8),
       st.lists(st.integers(0, 12), max_size=10),
       st.sampled_from(list(Normalization)))
def test_normalize_range(entries, objectives, mode):
    bm = DistanceBitmap(entries)
    out = normalize(bm, objectives, mode)
    assert len(out) == len(objectives)
    for site, v in zip(objectives, out):
        assert 0.0 <= v <= 1.0
        if site not in entries:
            assert v == 1.0


def test_log_normalization():
    (v,) = normalize(DistanceBitmap({0: 1}, k=3), [0], Normalization.LOG)
    assert v == pytest.approx(0.5)


def test_to_unsigned_preserves_order():
    vals = sorted(random.Random(0).randrange(-(2**63), 2**63) for _ in range(200))
    mapped = [to_unsigned(v) for v in vals]
    assert mapped == sorted(mapped)
    assert to_unsigned(-1) == 2**63 - 1
    with pytest.raises(ValueError):
        to_unsigned(2**63)


@pytest.mark.parametrize("rel,a,b,expected", [
    (Relation.GT, 2, 1, True), (Relation.GE, 1, 1, True), (Relation.LE, 2, 1, False),
    (Relation.LT, 1, 2, True), (Relation.EQ, 1, 1, True), (Relation.NE, 1, 1, False),
    (Relation.TRUE, 0, 0, True), (Relation.FALSE, 0, 0, False),
])
def test_relation_holds(rel, a, b, expected):
    assert rel.holds(a, b) is expected
