"""Which bytes matter?  Training the distance model and reading its input gradient.

A handful of ``fig1`` inputs are executed, their distances to the open
branches become training labels, and the gradient of the predicted
distance with respect to each input byte ranks the bytes.
"""

import random

import numpy as np

from finch import get_target, run
from finch.model import TrainConfig, build_training_set, train
from finch.mutator import rank

fig1 = get_target("fig1")
rng = random.Random(0)


class Executed:
    def __init__(self, data):
        self.input = data
        self.distances = run(fig1, data).distances


seeds = [Executed(bytes(rng.randrange(256) for _ in range(8))) for _ in range(24)]
objectives = [1, 4]  # the checksum and the magic comparison
data = build_training_set(seeds, objectives)
model = train(data, TrainConfig(hidden=64, epochs=200))
print(f"loss {model.loss_history[0]:.4f} -> {model.loss_history[-1]:.4f}")

x = data.X[0]
g = model.input_gradients(x)
print("gradient:", np.round(g, 4))
print("bytes by |gradient|:", rank(g))
per = model.input_gradients_per_objective(x)
for obj, row in zip(objectives, per):
    print(f"site {obj}: hottest bytes {rank(row)[:4]}")
