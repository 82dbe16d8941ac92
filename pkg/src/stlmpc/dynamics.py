"""Deterministic neural dynamics model predicting state deltas.

The network maps normalized ``[s; a]`` to the normalized delta ``s' - s``;
:meth:`DynamicsModel.predict` undoes both normalizations and adds the delta
back onto the state. Backpropagation and the momentum-SGD trainer are written
directly against numpy arrays.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .trace import (STD_FLOOR, Dataset, DimensionError, NormStats, Trajectory,
                    compute_norm_stats, split)

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "stlmpc-dynamics/1"


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    hidden_sizes: tuple[int, ...] = (256, 256)
    learning_rate: float = 1e-3
    momentum: float = 0.9
    batch_size: int = 512
    epochs: int = 50
    seed: int = 0
    split_fraction: float = 0.9

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if any(h <= 0 for h in self.hidden_sizes):
            raise ValueError("hidden sizes must be positive")
        if self.learning_rate <= 0 or self.batch_size <= 0 or self.epochs <= 0:
            raise ValueError("learning_rate, batch_size and epochs must be positive")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if not 0 < self.split_fraction < 1:
            raise ValueError("split_fraction must lie in (0, 1)")


@dataclass
class Mlp:
    """Fully connected tanh network with an identity output layer.

    ``weights[k]`` has shape ``(out, in)``.
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @classmethod
    def init(cls, sizes: Sequence[int], rng: np.random.Generator) -> "Mlp":
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            biases.append(rng.uniform(-bound, bound, size=fan_out))
        return cls(weights, biases)

    @classmethod
    def zeros(cls, sizes: Sequence[int]) -> "Mlp":
        return cls([np.zeros((o, i)) for i, o in zip(sizes[:-1], sizes[1:])],
                   [np.zeros(o) for o in sizes[1:]])

    @property
    def sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        h = x
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w.T + b
            if k < last:
                h = np.tanh(h)
        return h

    def forward_cache(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        acts = [x]
        h = x
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w.T + b
            if k < last:
                h = np.tanh(h)
            acts.append(h)
        return h, acts

    def backward(self, acts: list[np.ndarray], grad_out: np.ndarray):
        """Gradients of a scalar loss given ``dL/d(output)``."""
        gw = [None] * len(self.weights)
        gb = [None] * len(self.weights)
        delta = grad_out
        for k in range(len(self.weights) - 1, -1, -1):
            gw[k] = delta.T @ acts[k]
            gb[k] = delta.sum(axis=0)
            if k > 0:
                # acts[k] is tanh output, tanh' = 1 - tanh^2
                delta = (delta @ self.weights[k]) * (1.0 - acts[k] ** 2)
        return gw, gb

    def copy(self) -> "Mlp":
        return Mlp([w.copy() for w in self.weights], [b.copy() for b in self.biases])


@dataclass
class DynamicsModel:
    params: Mlp
    in_stats: NormStats
    out_stats: NormStats
    state_dim: int
    action_dim: int
    train_config: TrainConfig | None = None
    loss_curve: list[tuple[int, float, float]] = field(default_factory=list, repr=False)

    def __post_init__(self):
        if len(self.in_stats) != self.state_dim + self.action_dim:
            raise DimensionError("input stats do not match state_dim + action_dim")
        if len(self.out_stats) != self.state_dim:
            raise DimensionError("output stats do not match state_dim")
        sizes = self.params.sizes
        if sizes[0] != self.state_dim + self.action_dim or sizes[-1] != self.state_dim:
            raise DimensionError(f"network sizes {sizes} do not match the model dimensions")

    def _inputs(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        return (np.concatenate([states, actions], axis=-1) - self.in_stats.mean) / self.in_stats.std

    def predict(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        """Next states for a batch: ``s + denormalize(net(normalize([s; a])))``."""
        states = np.asarray(states, dtype=float)
        actions = np.asarray(actions, dtype=float)
        if states.shape[-1] != self.state_dim or actions.shape[-1] != self.action_dim:
            raise DimensionError(
                f"expected state/action dims {self.state_dim}/{self.action_dim}, "
                f"got {states.shape[-1]}/{actions.shape[-1]}")
        out = self.params(self._inputs(states, actions))
        return states + out * self.out_stats.std + self.out_stats.mean

    def forward(self, s, a) -> np.ndarray:
        s = np.asarray(s, dtype=float).reshape(-1)
        a = np.asarray(a, dtype=float).reshape(-1)
        return self.predict(s[None, :], a[None, :])[0]

    @classmethod
    def zero(cls, state_dim: int, action_dim: int, hidden: Sequence[int] = (8,)) -> "DynamicsModel":
        """Model whose predicted delta is identically zero."""
        sizes = (state_dim + action_dim, *hidden, state_dim)
        return cls(Mlp.zeros(sizes),
                   NormStats(np.zeros(state_dim + action_dim), np.ones(state_dim + action_dim)),
                   NormStats(np.zeros(state_dim), np.ones(state_dim)),
                   state_dim, action_dim)


def _normalized_batch(model: DynamicsModel, batch: Dataset) -> tuple[np.ndarray, np.ndarray]:
    if len(batch) == 0:
        raise ValueError("empty batch")
    if batch.state_dim != model.state_dim or batch.action_dim != model.action_dim:
        raise DimensionError("batch dimensions do not match the model")
    x = model._inputs(batch.states, batch.actions)
    y = (batch.deltas - model.out_stats.mean) / model.out_stats.std
    return x, y


def loss(model: DynamicsModel, batch: Dataset) -> float:
    """Mean over the batch of the squared error in normalized delta space."""
    x, y = _normalized_batch(model, batch)
    r = model.params(x) - y
    return float(np.sum(r * r) / len(x))


def gradients(model: DynamicsModel, batch: Dataset) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Exact gradient of :func:`loss` with respect to weights and biases."""
    x, y = _normalized_batch(model, batch)
    out, acts = model.params.forward_cache(x)
    return model.params.backward(acts, 2.0 * (out - y) / len(x))


def train(dataset: Dataset, cfg: TrainConfig = TrainConfig()) -> DynamicsModel:
    """Fit a dynamics model by mini-batch SGD with momentum.

    Normalization statistics come from the training split only. The per-epoch
    ``(epoch, train_loss, val_loss)`` history is stored on ``model.loss_curve``;
    ``train_loss`` is the average of the epoch's mini-batch losses.
    """
    dataset = Dataset(dataset.states, dataset.actions, dataset.next_states, cfg.split_fraction)
    train_set, val_set = split(dataset, cfg.seed)
    if len(train_set) < cfg.batch_size:
        raise ValueError(f"training split has {len(train_set)} transitions, "
                         f"fewer than batch_size={cfg.batch_size}")
    rng = np.random.default_rng(cfg.seed)
    n, m = dataset.state_dim, dataset.action_dim
    model = DynamicsModel(
        Mlp.init((n + m, *cfg.hidden_sizes, n), rng),
        compute_norm_stats(train_set.inputs),
        compute_norm_stats(train_set.deltas),
        n, m, cfg)
    x_train, y_train = _normalized_batch(model, train_set)
    net = model.params
    # state dims whose delta never varies are pinned to their constant delta
    fixed = train_set.deltas.std(axis=0) < STD_FLOOR
    net.weights[-1][fixed] = 0.0
    net.biases[-1][fixed] = 0.0
    vel_w = [np.zeros_like(w) for w in net.weights]
    vel_b = [np.zeros_like(b) for b in net.biases]
    n_train = len(x_train)
    curve = []
    for epoch in range(1, cfg.epochs + 1):
        perm = rng.permutation(n_train)
        total = 0.0
        for start in range(0, n_train - cfg.batch_size + 1, cfg.batch_size):
            idx = perm[start:start + cfg.batch_size]
            xb, yb = x_train[idx], y_train[idx]
            with np.errstate(over="ignore", invalid="ignore"):
                out, acts = net.forward_cache(xb)
                r = out - yb
                r[:, fixed] = 0.0
                batch_loss = float(np.sum(r * r) / len(xb))
            if not np.isfinite(batch_loss):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}, batch starting at {start}; "
                    f"try a smaller learning rate (currently {cfg.learning_rate})")
            total += batch_loss * len(xb)
            gw, gb = net.backward(acts, 2.0 * r / len(xb))
            for k in range(len(net.weights)):
                vel_w[k] *= cfg.momentum
                vel_w[k] -= cfg.learning_rate * gw[k]
                net.weights[k] += vel_w[k]
                vel_b[k] *= cfg.momentum
                vel_b[k] -= cfg.learning_rate * gb[k]
                net.biases[k] += vel_b[k]
        seen = (n_train // cfg.batch_size) * cfg.batch_size
        train_loss = total / seen
        val_loss = loss(model, val_set) if len(val_set) else float("nan")
        curve.append((epoch, train_loss, val_loss))
        log.debug("epoch %d train %.6g val %.6g", epoch, train_loss, val_loss)
    model.loss_curve = curve
    return model


def rollout_batch(model, s0: np.ndarray, actions: np.ndarray) -> np.ndarray:
    """Open-loop predictions for a batch of action sequences.

    ``actions`` has shape ``(B, H, m)``; returns ``(B, H + 1, n)`` with the
    first sample equal to ``s0``. Non-finite predictions are left in place.
    """
    actions = np.asarray(actions, dtype=float)
    b, h, _ = actions.shape
    s0 = np.asarray(s0, dtype=float)
    out = np.empty((b, h + 1, s0.shape[-1]))
    out[:, 0] = s0
    with np.errstate(all="ignore"):
        for i in range(h):
            out[:, i + 1] = model.predict(out[:, i], actions[:, i])
    return out


def rollout(model, s0, actions, names: Sequence[str] | None = None, dt: float = 1.0) -> Trajectory:
    """Iterate the model from ``s0`` under ``actions`` (shape ``(H, m)``)."""
    actions = np.asarray(actions, dtype=float)
    if actions.ndim == 1:
        actions = actions.reshape(-1, model.action_dim)
    if len(actions) < 1:
        raise ValueError("rollout needs at least one action")
    s0 = np.asarray(s0, dtype=float)
    if s0.shape != (model.state_dim,):
        raise DimensionError(f"s0 has shape {s0.shape}, expected ({model.state_dim},)")
    states = rollout_batch(model, s0, actions[None])[0]
    if not np.all(np.isfinite(states)):
        bad = int(np.argmax(~np.all(np.isfinite(states), axis=1)))
        raise FloatingPointError(f"rollout produced a non-finite state at step {bad}")
    if names is None:
        names = [f"s{i}" for i in range(model.state_dim)]
    return Trajectory(tuple(names), states, dt)


def save_checkpoint(model: DynamicsModel, path: str | Path) -> None:
    cfg = model.train_config
    doc = {
        "format": CHECKPOINT_FORMAT,
        "state_dim": model.state_dim,
        "action_dim": model.action_dim,
        "hidden_sizes": list(model.params.sizes[1:-1]),
        "layers": [
            {"shape": list(w.shape), "weight": w.reshape(-1).tolist(), "bias": b.tolist()}
            for w, b in zip(model.params.weights, model.params.biases)
        ],
        "in_stats": model.in_stats.to_dict(),
        "out_stats": model.out_stats.to_dict(),
        "train_config": None if cfg is None else {**asdict(cfg), "hidden_sizes": list(cfg.hidden_sizes)},
        "seed": None if cfg is None else cfg.seed,
    }
    Path(path).write_text(json.dumps(doc, indent=1))


def load_checkpoint(path: str | Path) -> DynamicsModel:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not a dynamics checkpoint (format={doc.get('format')!r})")
    weights, biases = [], []
    for layer in doc["layers"]:
        weights.append(np.array(layer["weight"], dtype=float).reshape(layer["shape"]))
        biases.append(np.array(layer["bias"], dtype=float))
    cfg = doc.get("train_config")
    return DynamicsModel(
        Mlp(weights, biases),
        NormStats.from_dict(doc["in_stats"]),
        NormStats.from_dict(doc["out_stats"]),
        int(doc["state_dim"]), int(doc["action_dim"]),
        None if cfg is None else TrainConfig(**cfg),
    )
