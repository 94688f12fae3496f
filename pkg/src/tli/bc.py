"""Neural behavior-cloning baseline: bounded-output velocity regressor.

A two-hidden-layer perceptron trained on (state, velocity) pairs. Outputs
pass through tanh and are rescaled, so predicted velocities are bounded but
carry no stability guarantee; the comparison against the stable
blended-linear policies rests on exactly that difference.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .optim import Adam

_HIDDEN = 100


@dataclass(frozen=True)
class MlpPolicy:
    weights: tuple[np.ndarray, ...]  # W1 (n,h), W2 (h,h), W3 (h,n)
    biases: tuple[np.ndarray, ...]
    output_scale: float = 50.0

    def __post_init__(self):
        object.__setattr__(
            self, "weights", tuple(np.asarray(w, dtype=float) for w in self.weights)
        )
        object.__setattr__(
            self, "biases", tuple(np.asarray(b, dtype=float) for b in self.biases)
        )
        if len(self.weights) != 3 or len(self.biases) != 3:
            raise ValueError("policy has exactly two hidden layers")
        if self.output_scale <= 0:
            raise ValueError("output_scale must be positive")

    @property
    def n(self) -> int:
        return self.weights[0].shape[0]


def _forward(policy: MlpPolicy, X: np.ndarray):
    W1, W2, W3 = policy.weights
    b1, b2, b3 = policy.biases
    z1 = X @ W1 + b1
    h1 = np.maximum(z1, 0.0)
    z2 = h1 @ W2 + b2
    h2 = np.maximum(z2, 0.0)
    z3 = h2 @ W3 + b3
    out = policy.output_scale * np.tanh(z3)
    return out, (X, z1, h1, z2, h2, z3)


def predict(policy: MlpPolicy, x: np.ndarray) -> np.ndarray:
    out, _ = _forward(policy, np.asarray(x, dtype=float)[None, :])
    return out[0]


def predict_batch(policy: MlpPolicy, pts: np.ndarray) -> np.ndarray:
    out, _ = _forward(policy, np.asarray(pts, dtype=float))
    return out


def _gradients(policy: MlpPolicy, X: np.ndarray, Y: np.ndarray):
    """Mean-squared-error loss and its parameter gradients."""
    out, (X0, z1, h1, z2, h2, z3) = _forward(policy, X)
    N = len(X)
    diff = out - Y
    loss = float(np.mean(np.sum(diff * diff, axis=1)))
    d_out = 2.0 * diff / N
    d_z3 = d_out * policy.output_scale * (1.0 - np.tanh(z3) ** 2)
    W1, W2, W3 = policy.weights
    gW3 = h2.T @ d_z3
    gb3 = d_z3.sum(axis=0)
    d_h2 = d_z3 @ W3.T
    d_z2 = d_h2 * (z2 > 0.0)
    gW2 = h1.T @ d_z2
    gb2 = d_z2.sum(axis=0)
    d_h1 = d_z2 @ W2.T
    d_z1 = d_h1 * (z1 > 0.0)
    gW1 = X0.T @ d_z1
    gb1 = d_z1.sum(axis=0)
    return loss, [gW1, gW2, gW3, gb1, gb2, gb3]


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 5000
    learning_rate: float = 1e-3
    hidden: int = _HIDDEN
    output_scale: float = 50.0
    seed: int = 0


def init_policy(n: int, config: TrainConfig) -> MlpPolicy:
    rng = np.random.default_rng(config.seed)
    h = config.hidden
    shapes = [(n, h), (h, h), (h, n)]
    weights = []
    biases = []
    for fan_in, fan_out in shapes:
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(rng.uniform(-bound, bound, size=fan_out))
    return MlpPolicy(tuple(weights), tuple(biases), config.output_scale)


def train(
    pairs: Sequence[tuple[np.ndarray, np.ndarray]],
    config: Optional[TrainConfig] = None,
) -> MlpPolicy:
    """Full-batch Adam regression of velocities on states."""
    if not pairs:
        raise ValueError("pairs must be nonempty")
    config = config or TrainConfig()
    X = np.array([np.asarray(p[0], dtype=float) for p in pairs])
    Y = np.array([np.asarray(p[1], dtype=float) for p in pairs])
    policy = init_policy(X.shape[1], config)
    params = list(policy.weights) + list(policy.biases)
    opt = Adam(params, lr=config.learning_rate)
    live = MlpPolicy(tuple(params[:3]), tuple(params[3:]), config.output_scale)
    for epoch in range(config.epochs):
        # cosine decay keeps full-batch Adam from oscillating once converged
        opt.lr = config.learning_rate * 0.5 * (1.0 + np.cos(np.pi * epoch / config.epochs))
        _, grads = _gradients(live, X, Y)
        opt.step(params, grads)
    return MlpPolicy(
        tuple(p.copy() for p in params[:3]),
        tuple(p.copy() for p in params[3:]),
        config.output_scale,
    )


def training_rmse(policy: MlpPolicy, pairs: Sequence) -> float:
    X = np.array([np.asarray(p[0], dtype=float) for p in pairs])
    Y = np.array([np.asarray(p[1], dtype=float) for p in pairs])
    out = predict_batch(policy, X)
    return float(np.sqrt(np.mean(np.sum((out - Y) ** 2, axis=1))))


def policy_to_json(policy: MlpPolicy) -> str:
    return json.dumps(
        {
            "kind": "mlp",
            "weights": [w.tolist() for w in policy.weights],
            "biases": [b.tolist() for b in policy.biases],
            "output_scale": policy.output_scale,
        }
    )


def policy_from_json(blob: str) -> MlpPolicy:
    data = json.loads(blob)
    if data.get("kind") != "mlp":
        raise ValueError("not a neural policy blob")
    return MlpPolicy(
        tuple(np.asarray(w, dtype=float) for w in data["weights"]),
        tuple(np.asarray(b, dtype=float) for b in data["biases"]),
        data["output_scale"],
    )
