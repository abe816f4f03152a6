"""How far is an input from flipping a branch?

Runs the built-in ``fig1`` target on two inputs and prints the distance
recorded at every comparison site, then the normalized label vector the
model would be trained on.
"""

from finch import get_target, run
from finch.distance import DEFAULT_K, Normalization, normalize

fig1 = get_target("fig1")
inputs = {
    "t0": bytes([1, 1, 1, 0x0A, 0, 0, 0, 0]),
    "t1": bytes([0x6F, 0x56, 0xDF, 0x75, 0, 0, 0, 0]),
}

for name, data in inputs.items():
    res = run(fig1, data)
    print(f"{name} = {data.hex()}  outcome={res.outcome.name}")
    for site in range(1, fig1.site_count):
        d = res.distances.get(site)
        shown = "K (not reached)" if d == DEFAULT_K and site not in res.distances.entries else d
        print(f"  site {site}: {shown}")
    print("  linear labels:", [round(v, 6) for v in normalize(res.distances, [1, 2, 3, 4])])
    print("  log labels:   ", [round(v, 4) for v in normalize(res.distances, [1, 2, 3, 4], Normalization.LOG)])

# t1 is 4 away from the magic comparison; two more in the last byte reach it
near = bytes([0x6F, 0x56, 0xDF, 0x77, 0, 0, 0, 0])
res = run(fig1, near)
print(f"\n{near.hex()} -> {res.outcome.name}, bug {res.bug_id}")
