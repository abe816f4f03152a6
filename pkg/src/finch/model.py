"""One-hidden-layer network mapping input bytes to normalized branch distances.

Hidden units use ReLU, outputs use the logistic function.  Labels equal to
1.0 mean "site not visited" and are masked out of the loss.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence

import numpy as np

from .distance import Normalization, normalize

EPS = 1e-7


@dataclass
class TrainConfig:
    hidden: int = 512
    epochs: int = 200
    lr: float = 1e-2
    momentum: float = 0.9
    batch_size: int = 256
    rng_seed: int = 0


@dataclass
class TrainingSet:
    X: np.ndarray  # (n, in_dim) bytes / 255, zero padded
    Y: np.ndarray  # (n, out_dim) normalized distances

    def __len__(self) -> int:
        return len(self.X)


def encode_inputs(inputs: Sequence[bytes], width: Optional[int] = None) -> np.ndarray:
    width = max(len(b) for b in inputs) if width is None else width
    X = np.zeros((len(inputs), width))
    for i, b in enumerate(inputs):
        b = b[:width]
        X[i, : len(b)] = np.frombuffer(b, dtype=np.uint8)
    return X / 255.0


def build_training_set(
    seeds: Iterable,
    objectives: Sequence[int],
    normalization: Normalization | str = Normalization.LINEAR,
) -> Optional[TrainingSet]:
    """One example per seed; ``None`` when there is nothing to learn.

    Seeds expose ``input`` (bytes) and ``distances`` (:class:`DistanceBitmap`),
    or ``payload`` carrying those.
    """
    seeds = list(seeds)
    if not seeds or not objectives:
        return None
    inputs, bitmaps = [], []
    for s in seeds:
        src = s.payload if getattr(s, "payload", None) is not None else s
        inputs.append(bytes(src.input if hasattr(src, "input") else src.data))
        bitmaps.append(src.distances)
    if max(len(b) for b in inputs) == 0:
        return None
    X = encode_inputs(inputs)
    Y = np.array([normalize(bm, objectives, normalization) for bm in bitmaps], dtype=float)
    return TrainingSet(X, Y)


def masked_bce(y, y_hat) -> float:
    """Mean binary cross-entropy with ``y == 1`` entries contributing 0.

    Accepts a single vector or a batch (rows averaged).
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    y_hat = np.clip(np.atleast_2d(np.asarray(y_hat, dtype=float)), EPS, 1 - EPS)
    terms = y * np.log(y_hat) + (1 - y) * np.log(1 - y_hat)
    terms = np.where(y == 1.0, 0.0, terms)
    return float(-terms.mean(axis=1).mean()) if y.size else 0.0


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass
class Model:
    W1: np.ndarray  # (in_dim, hidden)
    b1: np.ndarray
    W2: np.ndarray  # (hidden, out_dim)
    b2: np.ndarray
    loss_history: List[float] = field(default_factory=list, repr=False)
    aborted: bool = False

    @classmethod
    def init(cls, in_dim: int, out_dim: int, hidden: int, rng: np.random.Generator) -> "Model":
        # torch.nn.Linear default: U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and bias
        a1 = 1.0 / np.sqrt(in_dim)
        a2 = 1.0 / np.sqrt(hidden)
        return cls(
            W1=rng.uniform(-a1, a1, (in_dim, hidden)),
            b1=rng.uniform(-a1, a1, hidden),
            W2=rng.uniform(-a2, a2, (hidden, out_dim)),
            b2=rng.uniform(-a2, a2, out_dim),
        )

    @property
    def in_dim(self) -> int:
        return self.W1.shape[0]

    @property
    def out_dim(self) -> int:
        return self.W2.shape[1]

    def params(self):
        return [self.W1, self.b1, self.W2, self.b2]

    def forward(self, X):
        X = np.atleast_2d(X)
        z1 = X @ self.W1 + self.b1
        a1 = np.maximum(z1, 0.0)
        return _sigmoid(a1 @ self.W2 + self.b2), (X, z1, a1)

    def predict(self, X) -> np.ndarray:
        return self.forward(X)[0]

    def loss(self, X, Y) -> float:
        return masked_bce(Y, self.predict(X))

    def loss_and_grads(self, X, Y):
        """Masked BCE over the batch and its gradients w.r.t. every parameter."""
        Y = np.atleast_2d(Y)
        y_hat, (X, z1, a1) = self.forward(X)
        n, m = Y.shape
        live = (Y != 1.0) & (y_hat > EPS) & (y_hat < 1 - EPS)
        dz2 = np.where(live, y_hat - Y, 0.0) / (n * m)
        dW2 = a1.T @ dz2
        db2 = dz2.sum(axis=0)
        dz1 = (dz2 @ self.W2.T) * (z1 > 0)
        dW1 = X.T @ dz1
        db1 = dz1.sum(axis=0)
        return masked_bce(Y, y_hat), [dW1, db1, dW2, db2]

    def input_gradients(self, x, objective_subset: Optional[Iterable[int]] = None) -> np.ndarray:
        """d(sum of selected outputs)/dx for a single input vector (signed)."""
        x = np.asarray(x, dtype=float).reshape(-1)
        subset = sorted(objective_subset) if objective_subset else list(range(self.out_dim))
        z1 = x @ self.W1 + self.b1
        a1 = np.maximum(z1, 0.0)
        y_hat = _sigmoid(a1 @ self.W2 + self.b2)
        dy = np.zeros(self.out_dim)
        dy[subset] = y_hat[subset] * (1.0 - y_hat[subset])
        return self.W1 @ ((self.W2 @ dy) * (z1 > 0))

    def input_gradients_per_objective(self, x) -> np.ndarray:
        """One gradient row per output, shape ``(out_dim, len(x))``."""
        x = np.asarray(x, dtype=float).reshape(-1)
        z1 = x @ self.W1 + self.b1
        a1 = np.maximum(z1, 0.0)
        y_hat = _sigmoid(a1 @ self.W2 + self.b2)
        dy = y_hat * (1.0 - y_hat)
        return ((self.W2 * dy).T * (z1 > 0)) @ self.W1.T


def masked_bce_grad(y, y_hat) -> np.ndarray:
    """Gradient of :func:`masked_bce` (single vector) w.r.t. the predictions."""
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    live = (y != 1.0) & (y_hat > EPS) & (y_hat < 1 - EPS)
    g = -(y / np.where(live, y_hat, 1.0) - (1 - y) / np.where(live, 1 - y_hat, 1.0)) / y.size
    return np.where(live, g, 0.0)


def train(data: TrainingSet, cfg: TrainConfig = TrainConfig()) -> Model:
    """Fit a fresh model with momentum gradient descent.

    Full batch when the set is smaller than ``cfg.batch_size``.  A non-finite
    loss stops training and returns the last finite parameters with
    ``model.aborted`` set.
    """
    if len(data) == 0:
        raise ValueError("empty training set")
    rng = np.random.default_rng(cfg.rng_seed)
    X, Y = data.X, data.Y
    model = Model.init(X.shape[1], Y.shape[1], cfg.hidden, rng)
    velocity = [np.zeros_like(p) for p in model.params()]
    n = len(X)
    full = n < cfg.batch_size
    for _ in range(cfg.epochs):
        if full:
            batches = [slice(None)]
        else:
            perm = rng.permutation(n)
            batches = [perm[i : i + cfg.batch_size] for i in range(0, n, cfg.batch_size)]
        epoch_loss = 0.0
        for idx in batches:
            loss, grads = model.loss_and_grads(X[idx], Y[idx])
            # stop before applying a non-finite step: parameters stay at the last finite state
            if not np.isfinite(loss) or not all(np.isfinite(g).all() for g in grads):
                model.aborted = True
                return model
            epoch_loss += loss * (len(X[idx]) / n)
            for p, v, g in zip(model.params(), velocity, grads):
                v *= cfg.momentum
                v -= cfg.lr * g
                p += v
        model.loss_history.append(epoch_loss)
    return model
