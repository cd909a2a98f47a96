"""Training loops: the angle-space trainer and the dense baselines.

Both trainers share one minibatch SGD loop so their metrics are
directly comparable. Runs are deterministic given the config seed;
only the recorded wall-clock column varies between repeats.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, replace

import numpy as np

from .baselines import SVBConfig, stiefel_update, svb_update
from .data import Dataset
from .linalg import qr
from .network import (
    Network,
    NetworkGradients,
    activate,
    activation_grad,
    loss_and_delta,
    network_backward,
    network_forward,
    predict,
    random_network,
    sgd_step,
    zero_gradients,
)

METRICS_COLUMNS = ("epoch", "minibatch", "train_loss", "test_accuracy", "wall_ms")

UPDATERS = ("plain", "svb", "stiefel")


@dataclass
class TrainConfig:
    learning_rate: float
    epochs: int
    batch_size: int
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if not np.isfinite(self.learning_rate) or self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be finite and > 0, got {self.learning_rate}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")


@dataclass
class MetricsRow:
    epoch: int
    minibatch: int
    train_loss: float
    test_accuracy: float
    wall_ms: float


@dataclass
class MetricsTable:
    rows: list[MetricsRow]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(METRICS_COLUMNS)
            for r in self.rows:
                writer.writerow(
                    [r.epoch, r.minibatch, f"{r.train_loss:.17g}",
                     f"{r.test_accuracy:.17g}", f"{r.wall_ms:.3f}"]
                )

    @classmethod
    def from_csv(cls, path) -> "MetricsTable":
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            missing = [c for c in METRICS_COLUMNS if c not in (reader.fieldnames or [])]
            if missing:
                raise ValueError(f"metrics CSV missing columns: {', '.join(missing)}")
            rows = [
                MetricsRow(
                    int(r["epoch"]), int(r["minibatch"]), float(r["train_loss"]),
                    float(r["test_accuracy"]), float(r["wall_ms"]),
                )
                for r in reader
            ]
        return cls(rows)

    def final_accuracy(self) -> float:
        return self.rows[-1].test_accuracy

    def epoch_accuracies(self) -> list[float]:
        """Test accuracy recorded on the last minibatch of each epoch."""
        out: dict[int, float] = {}
        for r in self.rows:
            out[r.epoch] = r.test_accuracy
        return [out[e] for e in sorted(out)]


class _PyramidModel:
    """Adapter giving the shared loop a uniform model interface."""

    def __init__(self, net: Network):
        self.net = net

    def predict(self, x) -> np.ndarray:
        return predict(self.net, x)

    def batch_loss_and_step(self, xs, targets, lr: float) -> float:
        total = zero_gradients(self.net)
        loss_sum = 0.0
        for x, t in zip(xs, targets):
            out, traces, post = network_forward(self.net, x)
            value, delta = loss_and_delta(out, t, self.net.loss)
            loss_sum += value
            total.add_(network_backward(self.net, traces, post, delta))
        scale = 1.0 / len(xs)
        sgd_step(self.net, total.scaled(scale), lr)
        return loss_sum * scale


class DenseBaseline:
    """Plain dense network with explicit orthogonal weight matrices.

    Every layer keeps a square n_in x n_in matrix and reads the first
    n_out rows, mirroring the rectangular pyramid semantics, so the
    square-only SVB and manifold updaters apply to any architecture.
    """

    def __init__(
        self,
        arch: list[int],
        seed: int = 0,
        updater: str = "plain",
        svb_config: SVBConfig | None = None,
        activation: str = "sigmoid",
        loss: str = "softmax_ce",
    ):
        if updater not in UPDATERS:
            raise ValueError(f"unknown updater {updater!r}")
        if len(arch) < 2:
            raise ValueError("architecture needs at least input and output sizes")
        rng = np.random.default_rng(seed)
        self.arch = list(arch)
        self.updater = updater
        self.svb_config = svb_config or SVBConfig()
        self.activation = activation
        self.loss = loss
        self.weights: list[np.ndarray] = []
        self.n_outs: list[int] = []
        for n_in, n_out in zip(arch, arch[1:]):
            q, _ = qr(rng.normal(size=(n_in, n_in)))
            self.weights.append(q)
            self.n_outs.append(n_out)

    def predict(self, x) -> np.ndarray:
        a = np.asarray(x, dtype=np.float64)
        for w, n_out in zip(self.weights, self.n_outs):
            z = (w @ a)[:n_out]
            a = activate(self.activation, z)
        return a

    def _forward(self, x):
        a = np.asarray(x, dtype=np.float64)
        inputs, zs, posts = [], [], []
        for w, n_out in zip(self.weights, self.n_outs):
            inputs.append(a)
            z = (w @ a)[:n_out]
            a = activate(self.activation, z)
            zs.append(z)
            posts.append(a)
        return a, inputs, zs, posts

    def _gradients(self, x, target):
        out, inputs, zs, posts = self._forward(x)
        value, delta_a = loss_and_delta(out, target, self.loss)
        grads = [np.zeros_like(w) for w in self.weights]
        for li in reversed(range(len(self.weights))):
            n_out = self.n_outs[li]
            delta_z = delta_a * activation_grad(self.activation, zs[li], posts[li])
            padded = np.zeros(self.weights[li].shape[0])
            padded[:n_out] = delta_z
            grads[li] = np.outer(padded, inputs[li])
            delta_a = self.weights[li].T @ padded
        return value, grads

    def apply_update(self, grads: list[np.ndarray], lr: float) -> None:
        for li, g in enumerate(grads):
            w = self.weights[li]
            if self.updater == "plain":
                self.weights[li] = w - lr * g
            elif self.updater == "svb":
                self.weights[li] = svb_update(w, g, lr, self.svb_config)
            else:
                self.weights[li] = stiefel_update(w, g, lr)

    def batch_loss_and_step(self, xs, targets, lr: float) -> float:
        total = [np.zeros_like(w) for w in self.weights]
        loss_sum = 0.0
        for x, t in zip(xs, targets):
            value, grads = self._gradients(x, t)
            loss_sum += value
            for acc, g in zip(total, grads):
                acc += g
        scale = 1.0 / len(xs)
        self.apply_update([g * scale for g in total], lr)
        return loss_sum * scale


def _accuracy(model, ds: Dataset) -> float:
    hits = 0
    for x, label in zip(ds.features, ds.labels):
        hits += int(np.argmax(model.predict(x)) == label)
    return hits / len(ds.labels)


def _run_loop(
    model, train_set: Dataset, test_set: Dataset, cfg: TrainConfig,
    eval_each_minibatch: bool,
) -> MetricsTable:
    n = len(train_set.labels)
    if n == 0 or len(test_set.labels) == 0:
        raise ValueError("datasets must be non-empty")
    rng = np.random.default_rng(cfg.seed)
    rows: list[MetricsRow] = []
    accuracy = _accuracy(model, test_set)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n) if cfg.shuffle else np.arange(n)
        for bi, start in enumerate(range(0, n, cfg.batch_size)):
            batch = order[start : start + cfg.batch_size]
            t0 = time.perf_counter()
            loss = model.batch_loss_and_step(
                train_set.features[batch], train_set.labels[batch], cfg.learning_rate
            )
            wall = (time.perf_counter() - t0) * 1e3
            if eval_each_minibatch:
                accuracy = _accuracy(model, test_set)
            rows.append(MetricsRow(epoch, bi, loss, accuracy, wall))
        if not eval_each_minibatch:
            accuracy = _accuracy(model, test_set)
            rows[-1] = replace(rows[-1], test_accuracy=accuracy)
    return MetricsTable(rows)


def train(
    net: Network,
    train_set: Dataset,
    test_set: Dataset,
    cfg: TrainConfig,
    eval_each_minibatch: bool = False,
) -> MetricsTable:
    """Minibatch SGD on the gate angles.

    Gradients are averaged over each minibatch and applied in a fixed
    traversal order after a seeded shuffle per epoch. Test accuracy is
    evaluated per epoch (recorded on the epoch's last minibatch row)
    unless eval_each_minibatch is set.
    """
    if train_set.features.shape[1] != net.layers[0].n_in:
        raise ValueError(
            f"dataset width {train_set.features.shape[1]} does not match "
            f"first layer n_in {net.layers[0].n_in}"
        )
    return _run_loop(_PyramidModel(net), train_set, test_set, cfg, eval_each_minibatch)


def dense_train_baseline(
    arch: list[int],
    train_set: Dataset,
    test_set: Dataset,
    cfg: TrainConfig,
    updater: str = "plain",
    svb_epsilon: float = 0.0,
    eval_each_minibatch: bool = False,
) -> MetricsTable:
    """Identical loop to `train` but on explicit weight matrices."""
    if train_set.features.shape[1] != arch[0]:
        raise ValueError(
            f"dataset width {train_set.features.shape[1]} does not match arch input {arch[0]}"
        )
    model = DenseBaseline(
        arch, seed=cfg.seed, updater=updater, svb_config=SVBConfig(svb_epsilon)
    )
    return _run_loop(model, train_set, test_set, cfg, eval_each_minibatch)


def make_network(arch: list[int], seed: int = 0, **kwargs) -> Network:
    """Convenience wrapper so callers need only the architecture list."""
    return random_network(arch, seed, **kwargs)
