import random

import pytest

from finch.distance import Relation
from finch.engine import (
    Budget,
    Campaign,
    EngineConfig,
    baseline_fuzz,
    dedup_crash,
    hot_fuzz,
)
from finch.pareto import ScoredSeed, min_pareto_set
from finch.target import FIG1, NESTED, Target, get_target

SMALL = dict(hidden_width=32, epochs=20)


def rand_seeds(n, length, seed):
    rng = random.Random(seed)
    return [bytes(rng.randrange(256) for _ in range(length)) for _ in range(n)]


def test_dedup_crash_examples():
    pool = []
    assert dedup_crash(pool, (b"a", 0)) == [(b"a", 0)]
    assert dedup_crash(pool, (b"b", 0)) == [(b"a", 0)]
    assert dedup_crash(pool, (b"c", 1)) == [(b"a", 0), (b"c", 1)]


def test_budget_requires_a_limit():
    with pytest.raises(ValueError):
        Budget()


def test_zero_budget_finch_returns_minimized_t0():
    T0 = [bytes([1, 1, 1, 0x0A, 0, 0, 0, 0]), bytes([0x6F, 0x56, 0xDF, 0x75, 0, 0, 0, 0]), bytes(8)]
    r = hot_fuzz(FIG1, T0, Budget(execs=0), EngineConfig(**SMALL))
    assert len(r.stats) == 1
    assert r.crash_pool == []
    assert r.generations == []
    fv = [ScoredSeed(s.data, tuple(s.distances.project(r.objectives))) for s in r.seed_pool]
    assert len(min_pareto_set(fv)) == len(fv)
    # T0 executions still count
    assert r.stats[0].execs == 3


def test_zero_budget_baseline_dedups_by_coverage():
    T0 = [bytes(8), bytes([0, 0, 0, 0, 1, 1, 1, 1]), bytes([2, 2, 2, 2, 0, 0, 0, 0])]
    r = baseline_fuzz(FIG1, T0, Budget(execs=0))
    # the first two take the same path; the third passes the checksum
    assert [s.data for s in r.seed_pool] == [T0[0], T0[2]]
    assert len(r.stats) == 1


def test_empty_t0_rejected():
    with pytest.raises(ValueError):
        hot_fuzz(FIG1, [], Budget(execs=10))


@pytest.mark.parametrize("mode", ["finch", "baseline"])
def test_progress_monotone_and_budget_respected(mode):
    cfg = EngineConfig(mode=mode, campaign_seed=1, **SMALL)
    r = Campaign(get_target("lenfield"), cfg).run(rand_seeds(3, 12, 1), Budget(execs=20000))
    edges = [row.edges_covered for row in r.stats]
    crashes = [row.crashes_unique for row in r.stats]
    execs = [row.execs for row in r.stats]
    assert edges == sorted(edges) and crashes == sorted(crashes)
    assert execs == sorted(set(execs))
    assert execs[-1] <= 20000
    assert len(r.stats) == len(r.generations) + 1


def test_pool_is_fixed_point_of_minimization():
    cfg = EngineConfig(campaign_seed=2, check_invariants=True, **SMALL)
    r = Campaign(NESTED, cfg).run(rand_seeds(4, 16, 2), Budget(execs=30000))
    assert r.generations
    for g in r.generations:
        assert g.pool_out <= g.boundary <= g.candidates


@pytest.mark.parametrize("mode", ["finch", "baseline"])
def test_reproducible(mode):
    cfg = EngineConfig(mode=mode, campaign_seed=5, clock="virtual", **SMALL)
    T0 = rand_seeds(2, 8, 5)
    a = Campaign(FIG1, cfg).run(T0, Budget(execs=15000))
    b = Campaign(FIG1, cfg).run(T0, Budget(execs=15000))
    assert [s.as_tuple() for s in a.stats] == [s.as_tuple() for s in b.stats]
    assert a.crash_pool == b.crash_pool
    assert [s.data for s in a.seed_pool] == [s.data for s in b.seed_pool]


def test_different_seeds_diverge():
    T0 = rand_seeds(1, 8, 0)
    a = hot_fuzz(FIG1, T0, Budget(execs=5000), EngineConfig(campaign_seed=1, clock="virtual", **SMALL))
    b = hot_fuzz(FIG1, T0, Budget(execs=5000), EngineConfig(campaign_seed=2, clock="virtual", **SMALL))
    assert [s.data for s in a.seed_pool] != [s.data for s in b.seed_pool] or a.stats != b.stats


def _flaky_target():
    # byte 0 == 0xFF hangs, byte 0 == 0xFE crashes, anything else is ordinary
    def fn(data, h):
        h.report_block(0)
        b = data[0] if data else 0
        if h.report_cmp(0, Relation.EQ, b, 0xFF):
            while True:
                h.report_block(1)
        if h.report_cmp(1, Relation.EQ, b, 0xFE):
            h.report_bug(7)
        h.report_cmp(2, Relation.EQ, int.from_bytes(data[:4].ljust(4, b"\0"), "big"), 0x12345678)

    return Target("flaky", fn, max_input_len=8, site_count=3, block_count=2)


@pytest.mark.parametrize("mode", ["finch", "baseline"])
def test_hangs_and_crashes_never_pooled(mode):
    tgt = _flaky_target()
    cfg = EngineConfig(mode=mode, campaign_seed=3, event_budget=2000, **SMALL)
    T0 = [bytes([0xFF, 1, 2, 3]), bytes([0xFE, 1, 2, 3]), bytes([0x10, 1, 2, 3])]
    r = Campaign(tgt, cfg).run(T0, Budget(execs=3000))
    assert r.hangs >= 1
    assert [b for _, b in r.crash_pool] == [7]
    for s in r.seed_pool:
        assert s.data[0] not in (0xFE, 0xFF)


def test_time_budget_stops():
    r = hot_fuzz(FIG1, rand_seeds(1, 8, 1), Budget(seconds=0.5), EngineConfig(**SMALL))
    assert r.stats[-1].execs > 0


def test_finch_retains_distance_only_mutants():
    r = hot_fuzz(FIG1, rand_seeds(1, 8, 3), Budget(execs=20000), EngineConfig(campaign_seed=3, **SMALL))
    assert sum(g.distance_only for g in r.generations) > 0


def test_per_objective_gradient_mode_runs():
    cfg = EngineConfig(campaign_seed=4, gradient_mode="per_objective", **SMALL)
    r = Campaign(NESTED, cfg).run(rand_seeds(2, 16, 4), Budget(execs=5000))
    assert r.stats[-1].execs == 5000


def test_unknown_mode_rejected():
    with pytest.raises(ValueError):
        Campaign(FIG1, EngineConfig(mode="nope"))
