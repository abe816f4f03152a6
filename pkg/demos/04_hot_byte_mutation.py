"""Walking hot bytes up and down.

Bytes are ranked by gradient magnitude and grouped in slices of
doubling size.  Each group is stepped in both directions, one unit per
mutant, following the gradient sign, until every moving byte saturates.
"""

from finch.mutator import group_ranges, hot_byte_walk, mutate_hot_bytes, rank, signs

t = bytes([1, 1, 1, 0x0A, 0, 0, 0, 0])
g = [0.5, 0.5, 0.5, 0.9, 0, 0, 0, 0]

order = rank(g)
print("rank:", order)
for lo, hi in group_ranges(len(t)):
    print(f"slice {lo}:{hi} -> bytes {order[lo:hi]}")

locs = [2, 3]
for direction in (+1, -1):
    walk = list(hot_byte_walk(t, locs, signs(g)[locs], direction))
    print(f"bytes {locs} dir {direction:+d}: {len(walk)} mutants, "
          f"first {list(walk[0])}, last {list(walk[-1])}")

mutants = mutate_hot_bytes(t, g)
print(f"all groups: {len(mutants)} mutants; first three {[m.hex() for m in mutants[:3]]}")
print(f"with a budget of 8: {[m.hex() for m in mutate_hot_bytes(t, g, budget=8)]}")
