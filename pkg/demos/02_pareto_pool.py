"""Keeping a small seed pool with Pareto dominance.

Six inputs are scored on two open branches.  Only inputs that are not
dominated survive, and of those only as many as needed to keep the best
value for every branch.
"""

from finch.pareto import ScoredSeed, dominates, min_pareto_set, pareto_boundary

scores = {
    "t0": (6, 6),
    "t1": (2, 5),
    "t2": (7, 7),
    "t3": (3, 6),
    "t4": (5, 2),
    "t5": (6, 4),
}
pool = [ScoredSeed(name.encode(), fv) for name, fv in scores.items()]

print("dominates(t1, t0):", dominates(scores["t1"], scores["t0"]))
print("dominates(t1, t4):", dominates(scores["t1"], scores["t4"]))

boundary = pareto_boundary(pool)
print("boundary:", [s.input.decode() for s in boundary])

kept = min_pareto_set(boundary)
for s in kept:
    print(f"kept {s.input.decode()} {s.fvec}, best on objectives {sorted(s.J)}")

# an input that is best everywhere replaces everything else
kept = min_pareto_set(pareto_boundary(pool + [ScoredSeed(b"t6", (1, 1))]))
print("after t6 = (1, 1):", [s.input.decode() for s in kept])
