"""Distance-guided fuzzing against a plain coverage-guided loop.

Both modes fuzz ``fig1`` from the same random seed input.  The magic
comparison guarding bug 2 is a 32-bit equality, so random mutation
almost never satisfies it, while distance feedback walks toward it.
Takes about a minute.
"""

import random

from finch import Budget, EngineConfig, baseline_fuzz, get_target, hot_fuzz

fig1 = get_target("fig1")
rng = random.Random(1)
T0 = [bytes(rng.randrange(256) for _ in range(8))]
budget = Budget(execs=200_000)

for name, fuzz, cfg in [
    ("finch", hot_fuzz, EngineConfig(campaign_seed=1)),
    ("baseline", baseline_fuzz, EngineConfig(mode="baseline", campaign_seed=1)),
]:
    r = fuzz(fig1, T0, budget, cfg)
    last = r.stats[-1]
    bugs = sorted(str(b) for _, b in r.crash_pool)
    print(f"{name:8s} execs={last.execs} edges={last.edges_covered} pool={last.pool_size} bugs={bugs}")
    if name == "finch":
        kept = sum(g.distance_only for g in r.generations)
        print(f"         mutants kept for a better distance without new coverage: {kept}")
