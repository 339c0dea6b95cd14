"""Neural-network smoothing: fit a small MLP, then finite-difference it.

Training a tanh network on noisy samples yields a low-frequency
approximation of the signal (low frequencies are learned first), so central
differences of the network's grid predictions give a noise-damped
derivative estimate.  Training is full-batch gradient descent with
momentum: no hidden optimizer state beyond one velocity per parameter,
which keeps runs bit-reproducible for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .core import Field
from .diffapi import DiffRequest, DiffResult, fd_differentiate

MOMENTUM = 0.9


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch: int):
        super().__init__(f"training loss became non-finite at epoch {epoch}")
        self.epoch = epoch


@dataclass(frozen=True)
class AnnConfig:
    hidden_sizes: tuple[int, ...] = (64, 64)
    epochs: int = 20000
    learning_rate: float = 0.01
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if len(self.hidden_sizes) < 1:
            raise ValueError("at least one hidden layer is required")
        if any(h < 1 for h in self.hidden_sizes):
            raise ValueError("hidden layer sizes must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")


@dataclass
class Mlp:
    """Fully connected tanh network with a linear scalar output."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0],) + tuple(w.shape[1] for w in self.weights)

    def parameter_count(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)

    def copy(self) -> "Mlp":
        return Mlp([w.copy() for w in self.weights], [b.copy() for b in self.biases])


def mlp_init(cfg: AnnConfig, input_dim: int) -> Mlp:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases."""
    rng = np.random.default_rng(cfg.seed)
    sizes = (input_dim,) + cfg.hidden_sizes + (1,)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        scale = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-scale, scale, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Mlp(weights, biases)


def mlp_forward(net: Mlp, inputs: np.ndarray) -> np.ndarray:
    """Predictions for a batch of coordinate rows; accepts a single row too."""
    x = np.asarray(inputs, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != net.weights[0].shape[0]:
        raise ValueError(
            f"input dim {x.shape[1]} does not match network input {net.weights[0].shape[0]}"
        )
    h = x
    for w, b in zip(net.weights[:-1], net.biases[:-1]):
        h = np.tanh(h @ w + b)
    out = (h @ net.weights[-1] + net.biases[-1])[:, 0]
    return out[0] if single else out


def _loss_and_grads(net: Mlp, x: np.ndarray, y: np.ndarray):
    """MSE loss and its gradients by backprop through the tanh stack."""
    acts = [x]
    h = x
    for w, b in zip(net.weights[:-1], net.biases[:-1]):
        h = np.tanh(h @ w + b)
        acts.append(h)
    pred = (h @ net.weights[-1] + net.biases[-1])[:, 0]
    err = pred - y
    loss = float(np.mean(err * err))

    batch = len(y)
    delta = (2.0 / batch) * err[:, None]
    grads_w = [None] * len(net.weights)
    grads_b = [None] * len(net.biases)
    for layer in range(len(net.weights) - 1, -1, -1):
        grads_w[layer] = acts[layer].T @ delta
        grads_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ net.weights[layer].T) * (1.0 - acts[layer] ** 2)
    return loss, grads_w, grads_b


def _normalized_inputs(grid) -> np.ndarray:
    cols = []
    for ax, c in zip(grid.axes, grid.coords()):
        cols.append(2.0 * (c.reshape(-1) - ax.start) / (ax.stop - ax.start) - 1.0)
    return np.stack(cols, axis=1)


def _target_scaler(values: np.ndarray) -> tuple[float, float]:
    mean = float(values.mean())
    std = float(values.std())
    return mean, std if std > 0 else 1.0


def mlp_train(net: Mlp, data: Field, cfg: AnnConfig) -> tuple[Mlp, np.ndarray]:
    """Train in place on the field; returns (net, per-epoch loss trace).

    Coordinates are mapped to [-1, 1] per axis and targets standardized
    before training; trace entry e is the loss entering epoch e.  Raises
    :class:`TrainingDivergedError` if the loss leaves the finite range.
    """
    x = _normalized_inputs(data.grid)
    mean, std = _target_scaler(data.flat)
    y = (data.flat - mean) / std

    losses = np.empty(cfg.epochs)
    vel_w = [np.zeros_like(w) for w in net.weights]
    vel_b = [np.zeros_like(b) for b in net.biases]
    for epoch in range(cfg.epochs):
        loss, grads_w, grads_b = _loss_and_grads(net, x, y)
        if not np.isfinite(loss):
            raise TrainingDivergedError(epoch)
        losses[epoch] = loss
        for i in range(len(net.weights)):
            vel_w[i] = MOMENTUM * vel_w[i] + grads_w[i]
            vel_b[i] = MOMENTUM * vel_b[i] + grads_b[i]
            net.weights[i] -= cfg.learning_rate * vel_w[i]
            net.biases[i] -= cfg.learning_rate * vel_b[i]
    return net, losses


def ann_smooth(data: Field, cfg: AnnConfig) -> tuple[Field, np.ndarray]:
    """Fit the network to the field and evaluate it back on the grid."""
    net = mlp_init(cfg, data.grid.ndim)
    net, losses = mlp_train(net, data, cfg)
    mean, std = _target_scaler(data.flat)
    pred = mlp_forward(net, _normalized_inputs(data.grid)) * std + mean
    return Field(data.grid, pred.reshape(data.grid.shape)), losses


def ann_differentiate(data: Field, req: DiffRequest, cfg: AnnConfig) -> DiffResult:
    """Central finite differences of the trained network's grid predictions."""
    req.validate(data.grid)
    smoothed, _ = ann_smooth(data, cfg)
    result = fd_differentiate(smoothed, req, scheme="central")
    return DiffResult(result.derivative, result.valid_mask, notes=("ann-smoothed",))


def write_loss_trace_csv(losses: np.ndarray, path) -> None:
    """Dump a training trace as (epoch, loss) rows."""
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss"])
        for i, val in enumerate(losses):
            writer.writerow([i, f"{val:.17g}"])
