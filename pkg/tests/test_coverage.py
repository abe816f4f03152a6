import random
from collections import Counter

import pytest

from finch.coverage import (
    CoverageBitmap,
    CoverageConfigError,
    edge_id,
    new_edges,
    record_transition,
)


@pytest.mark.parametrize("x,y,expected", [(0, 0, 0), (2, 1, 0), (7, 4, 7)])
def test_edge_id_examples(x, y, expected):
    assert edge_id(x, y, 65536) == expected


def test_edge_id_wraps_to_map_size():
    assert edge_id(0, 70000, 65536) == 70000 % 65536
    assert edge_id(2**20, 0, 1024) == (2**19) % 1024


def test_transitions_two_distinct_edges():
    cov = CoverageBitmap()
    a, b = 1000, 2345
    for blk in (a, b):
        record_transition(cov, blk)
    assert cov.popcount() == 2
    assert cov.keys == {edge_id(0, a), edge_id(a, b)}


def test_repeated_transitions_are_idempotent():
    cov = CoverageBitmap()
    for blk in (1000, 2345):
        cov.record_transition(blk)
    once = cov.popcount()
    for blk in (1000, 2345):
        cov.record_transition(blk)
    # A->B repeats; the only other new key is B->A
    assert edge_id(1000, 2345) in cov
    assert cov.popcount() == once + 1


def test_colliding_pair_sets_same_bit():
    # brute-force search for two distinct edges with one key under a small map
    map_size = 64
    seen = {}
    pair = None
    for x in range(1, 200):
        for y in range(1, 200):
            key = edge_id(x, y, map_size)
            if key in seen and seen[key] != (x, y):
                pair = (seen[key], (x, y))
                break
            seen.setdefault(key, (x, y))
        if pair:
            break
    (x1, y1), (x2, y2) = pair
    a = CoverageBitmap(map_size)
    a.last_block = x1
    a.record_transition(y1)
    b = CoverageBitmap(map_size)
    b.last_block = x2
    b.record_transition(y2)
    assert a.keys == b.keys


@pytest.mark.parametrize(
    "glob,run,expected",
    [(set(), {5}, {5}), ({5}, {5}, set()), ({1, 2}, {2, 3}, {3})],
)
def test_new_edges(glob, run, expected):
    assert new_edges(CoverageBitmap(keys=glob), CoverageBitmap(keys=run)) == expected


def test_new_edges_map_size_mismatch():
    with pytest.raises(CoverageConfigError):
        new_edges(CoverageBitmap(1024), CoverageBitmap(2048))


def test_map_size_must_be_power_of_two():
    with pytest.raises(CoverageConfigError):
        CoverageBitmap(1000)


def test_edge_id_distribution():
    rng = random.Random(7)
    # small map so the mean bucket load is large enough for a 5x bound to be meaningful
    map_size = 1024
    loads = Counter(
        edge_id(rng.randrange(map_size), rng.randrange(map_size), map_size) for _ in range(10**5)
    )
    mean = 10**5 / map_size
    assert len(loads) == map_size
    assert max(loads.values()) <= 5 * mean


def test_merge_order_independent():
    rng = random.Random(3)
    runs = [CoverageBitmap(1024, {rng.randrange(1024) for _ in range(20)}) for _ in range(10)]
    counts = set()
    for _ in range(5):
        rng.shuffle(runs)
        g = CoverageBitmap(1024)
        for r in runs:
            g.merge(r)
        counts.add(g.popcount())
    assert len(counts) == 1


def test_to_bits_matches_keys():
    cov = CoverageBitmap(256, {1, 7, 255})
    bits = cov.to_bits()
    assert bits.sum() == 3 and bits[7] and bits[255]
