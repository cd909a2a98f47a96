"""Multi-layer networks of pyramid layers and angle-space backprop.

Each layer applies its rotations, optionally adds a bias, then a
pointwise nonlinearity. Gradients are taken with respect to the gate
angles directly, so every update leaves the equivalent weight matrix
exactly orthogonal; the per-layer backward pass costs O(gate count).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pyramid import (
    ForwardTrace,
    PyramidLayer,
    build_schedule,
    canonical_angles,
    random_layer,
)

ACTIVATIONS = ("sigmoid", "relu", "identity")
LOSSES = ("softmax_ce", "mse")


def activate(name: str, z: np.ndarray) -> np.ndarray:
    if name == "sigmoid":
        return 0.5 * (1.0 + np.tanh(0.5 * z))
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "identity":
        return z
    raise ValueError(f"unknown activation {name!r}")


def activation_grad(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    """sigma'(z), using the already-computed activation a where possible."""
    if name == "sigmoid":
        return a * (1.0 - a)
    if name == "relu":
        return (z > 0.0).astype(np.float64)
    if name == "identity":
        return np.ones_like(z)
    raise ValueError(f"unknown activation {name!r}")


@dataclass
class LayerSpec:
    rotations: PyramidLayer
    bias: np.ndarray | None = None
    activation: str = "sigmoid"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.bias is not None:
            b = np.asarray(self.bias, dtype=np.float64)
            if b.shape != (self.rotations.n_out,):
                raise ValueError(
                    f"bias length {b.shape} does not match n_out {self.rotations.n_out}"
                )
            self.bias = b

    @property
    def n_in(self) -> int:
        return self.rotations.n_in

    @property
    def n_out(self) -> int:
        return self.rotations.n_out


@dataclass
class Network:
    layers: list[LayerSpec]
    loss: str = "softmax_ce"

    def __post_init__(self):
        if not self.layers:
            raise ValueError("network needs at least one layer")
        if self.loss not in LOSSES:
            raise ValueError(f"unknown loss {self.loss!r}")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.n_out != nxt.n_in:
                raise ValueError(
                    f"layer sizes do not chain: {prev.n_out} -> {nxt.n_in}"
                )

    @property
    def arch(self) -> list[int]:
        return [self.layers[0].n_in] + [l.n_out for l in self.layers]


def random_network(
    arch: list[int],
    seed_or_rng=0,
    activation: str = "sigmoid",
    bias: bool = False,
    loss: str = "softmax_ce",
) -> Network:
    """Network with random angles for an architecture like [8, 8, 2]."""
    if len(arch) < 2:
        raise ValueError("architecture needs at least input and output sizes")
    rng = np.random.default_rng(seed_or_rng) if not isinstance(
        seed_or_rng, np.random.Generator
    ) else seed_or_rng
    layers = []
    for n_in, n_out in zip(arch, arch[1:]):
        layer = random_layer(n_in, n_out, rng)
        b = np.zeros(n_out) if bias else None
        layers.append(LayerSpec(layer, b, activation))
    return Network(layers, loss)


@dataclass
class BackwardTrace:
    """Per-timestep error vectors of one layer's backward pass."""

    inner_errors: list[np.ndarray]


@dataclass
class NetworkGradients:
    angles: list[np.ndarray]
    biases: list[np.ndarray | None]

    def scaled(self, factor: float) -> "NetworkGradients":
        return NetworkGradients(
            [g * factor for g in self.angles],
            [None if b is None else b * factor for b in self.biases],
        )

    def add_(self, other: "NetworkGradients") -> None:
        for g, o in zip(self.angles, other.angles):
            g += o
        for b, o in zip(self.biases, other.biases):
            if b is not None:
                b += o


def zero_gradients(net: Network) -> NetworkGradients:
    return NetworkGradients(
        [np.zeros(l.rotations.schedule.gate_count) for l in net.layers],
        [None if l.bias is None else np.zeros(l.n_out) for l in net.layers],
    )


def network_forward(
    net: Network, x
) -> tuple[np.ndarray, list[ForwardTrace], list[np.ndarray]]:
    """Full forward pass keeping the per-layer traces for backprop.

    Returns (output, traces, post_activations).
    """
    from .pyramid import forward

    a = np.asarray(x, dtype=np.float64)
    traces: list[ForwardTrace] = []
    post: list[np.ndarray] = []
    for spec in net.layers:
        y, trace = forward(spec.rotations, a, keep_trace=True)
        z = y + spec.bias if spec.bias is not None else y
        a = activate(spec.activation, z)
        traces.append(trace)
        post.append(a)
    return a, traces, post


def predict(net: Network, x) -> np.ndarray:
    """Forward pass without trace bookkeeping."""
    from .pyramid import forward

    a = np.asarray(x, dtype=np.float64)
    for spec in net.layers:
        y, _ = forward(spec.rotations, a)
        z = y + spec.bias if spec.bias is not None else y
        a = activate(spec.activation, z)
    return a


def _softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - np.max(z))
    return e / np.sum(e)


def loss_and_delta(output, target, loss: str = "softmax_ce") -> tuple[float, np.ndarray]:
    """Loss value and its gradient with respect to the network output.

    softmax_ce: target is a class index (or one-hot vector); delta is
    softmax(output) - onehot. mse: target is a vector, loss is
    0.5 * ||output - target||^2 and delta is output - target. The
    caller folds sigma' in when propagating through the last layer.
    """
    output = np.asarray(output, dtype=np.float64)
    if loss == "softmax_ce":
        if np.ndim(target) == 0:
            t = int(target)
            if not 0 <= t < output.size:
                raise ValueError(f"class index {t} out of range for {output.size} outputs")
            onehot = np.zeros_like(output)
            onehot[t] = 1.0
        else:
            onehot = np.asarray(target, dtype=np.float64)
            if onehot.shape != output.shape:
                raise ValueError("target shape does not match output")
        p = _softmax(output)
        value = float(-np.sum(onehot * np.log(np.maximum(p, 1e-300))))
        return value, p - onehot
    if loss == "mse":
        t = np.asarray(target, dtype=np.float64)
        if t.shape != output.shape:
            raise ValueError("target shape does not match output")
        diff = output - t
        return float(0.5 * np.sum(diff * diff)), diff
    raise ValueError(f"unknown loss {loss!r}")


def layer_backward(
    layer: PyramidLayer,
    trace: ForwardTrace,
    delta_out,
    stats: dict | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Angle gradients and input error of one layer.

    delta_out is dC/dz restricted to the n_out output wires; discarded
    wires of a rectangular layer carry no loss dependence and are
    padded with zeros. Timesteps run in reverse: each gate contributes
    its angle gradient from the current error and recorded wire
    vectors, then the error is pulled back through the transposed
    timestep.
    """
    grads, delta_in, _ = _backward(layer, trace, delta_out, keep_trace=False, stats=stats)
    return grads, delta_in


def layer_backward_with_trace(
    layer: PyramidLayer, trace: ForwardTrace, delta_out
) -> tuple[np.ndarray, np.ndarray, BackwardTrace]:
    grads, delta_in, errors = _backward(layer, trace, delta_out, keep_trace=True)
    return grads, delta_in, BackwardTrace(errors)


def _backward(layer, trace, delta_out, keep_trace, stats=None):
    schedule = layer.schedule
    steps = schedule.timestep_count
    if len(trace.inner_layers) != steps + 1:
        raise ValueError(
            f"trace has {len(trace.inner_layers)} entries, expected {steps + 1}"
        )
    delta_out = np.asarray(delta_out, dtype=np.float64)
    if delta_out.shape != (layer.n_out,):
        raise ValueError(f"expected error of length {layer.n_out}, got {delta_out.shape}")
    delta = np.zeros(layer.n_in)
    delta[: layer.n_out] = delta_out
    errors = [delta.copy()] if keep_trace else None
    cos = np.cos(layer.angles)
    sin = np.sin(layer.angles)
    grads = np.zeros(schedule.gate_count)
    groups = schedule.timestep_groups()
    for lam in reversed(range(steps)):
        wires, idx = groups[lam]
        zeta = trace.inner_layers[lam]
        zu = zeta[wires]
        zv = zeta[wires + 1]
        du = delta[wires]
        dv = delta[wires + 1]
        c = cos[idx]
        s = sin[idx]
        grads[idx] = du * (-s * zu + c * zv) + dv * (-c * zu - s * zv)
        delta[wires] = c * du - s * dv
        delta[wires + 1] = s * du + c * dv
        if stats is not None:
            stats["gate_visits"] = stats.get("gate_visits", 0) + 2 * len(idx)
        if keep_trace:
            errors.append(delta.copy())
    if keep_trace:
        errors.reverse()
    return grads, delta, errors


def network_backward(
    net: Network,
    traces: list[ForwardTrace],
    post_activations: list[np.ndarray],
    delta_output,
) -> NetworkGradients:
    """Backprop from dC/d(output) to every angle and bias gradient."""
    grads = zero_gradients(net)
    delta_a = np.asarray(delta_output, dtype=np.float64)
    for li in reversed(range(len(net.layers))):
        spec = net.layers[li]
        trace = traces[li]
        a = post_activations[li]
        z = trace.inner_layers[-1][: spec.n_out]
        if spec.bias is not None:
            z = z + spec.bias
        delta_z = delta_a * activation_grad(spec.activation, z, a)
        if spec.bias is not None:
            grads.biases[li][:] = delta_z
        grads.angles[li][:], delta_a = layer_backward(spec.rotations, trace, delta_z)
    return grads


def sgd_step(net: Network, grads: NetworkGradients, lr: float) -> None:
    """In-place gradient-descent update; angles stay in (-pi, pi].

    The update rewrites angles only, so the equivalent weight matrix of
    every layer remains exactly orthogonal by construction. Non-finite
    gradients abort before any parameter is touched.
    """
    if not np.isfinite(lr):
        raise ValueError("learning rate must be finite")
    for g in grads.angles:
        if not np.all(np.isfinite(g)):
            raise ValueError("non-finite angle gradient, aborting update")
    for b in grads.biases:
        if b is not None and not np.all(np.isfinite(b)):
            raise ValueError("non-finite bias gradient, aborting update")
    for spec, g, gb in zip(net.layers, grads.angles, grads.biases):
        spec.rotations.angles = canonical_angles(spec.rotations.angles - lr * g)
        if spec.bias is not None and gb is not None:
            spec.bias = spec.bias - lr * gb
