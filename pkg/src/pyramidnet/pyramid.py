"""Pyramidal circuits of two-wire planar rotations.

A layer on n wires is a diamond-shaped arrangement of rotation gates,
each acting on an adjacent wire pair (i, i+1) with one free angle.
The gate at angle t maps the pair (u, v) to

    (cos t * u + sin t * v,  -sin t * u + cos t * v)

and this block convention is normative for the whole package: the
classical forward pass, the gradient formulas and the statevector
simulator all share it.

Gates are grouped into timesteps of simultaneously applied,
non-overlapping rotations. A square layer has n(n-1)/2 gates over
2n-3 timesteps, exactly the parameter count of an n x n rotation
matrix. A rectangular layer reading d < n output wires keeps only the
gates inside the backward light cone of wires 0..d-1, which leaves
(2n-1-d)*d/2 gates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .linalg import as_matrix

TWO_PI = 2.0 * np.pi


class GateSlot(NamedTuple):
    """One rotation gate: wires (wire, wire+1) applied at `timestep`."""

    timestep: int
    wire: int


def canonical_angles(theta) -> np.ndarray:
    """Map angles into the canonical range (-pi, pi]."""
    t = np.mod(np.asarray(theta, dtype=np.float64), TWO_PI)
    return np.where(t > np.pi, t - TWO_PI, t)


@dataclass
class PyramidSchedule:
    """Ordered gate slots of one layer plus per-timestep index arrays.

    Instances are built by `build_schedule` and treated as immutable.
    """

    n_in: int
    n_out: int
    slots: tuple[GateSlot, ...]
    _groups: list[tuple[np.ndarray, np.ndarray]] = field(
        default_factory=list, repr=False, compare=False
    )

    def __post_init__(self):
        if not self._groups:
            by_step: list[tuple[list[int], list[int]]] = [
                ([], []) for _ in range(self.timestep_count)
            ]
            for idx, slot in enumerate(self.slots):
                by_step[slot.timestep][0].append(slot.wire)
                by_step[slot.timestep][1].append(idx)
            for wires, idxs in by_step:
                if not wires:
                    raise AssertionError("schedule has an empty timestep")
                self._groups.append(
                    (np.asarray(wires, dtype=np.intp), np.asarray(idxs, dtype=np.intp))
                )

    @property
    def gate_count(self) -> int:
        return len(self.slots)

    @property
    def timestep_count(self) -> int:
        return self.slots[-1].timestep + 1

    def timestep_groups(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """Per timestep: (wire indices, slot indices) of its gates."""
        return self._groups


@dataclass
class PyramidLayer:
    """A schedule plus one angle per gate slot, stored in (-pi, pi]."""

    schedule: PyramidSchedule
    angles: np.ndarray

    def __post_init__(self):
        ang = np.asarray(self.angles, dtype=np.float64)
        if ang.shape != (self.schedule.gate_count,):
            raise ValueError(
                f"expected {self.schedule.gate_count} angles, got shape {ang.shape}"
            )
        if not np.all(np.isfinite(ang)):
            raise ValueError("angles must be finite")
        self.angles = canonical_angles(ang)

    @property
    def n_in(self) -> int:
        return self.schedule.n_in

    @property
    def n_out(self) -> int:
        return self.schedule.n_out


@dataclass
class ForwardTrace:
    """All intermediate wire vectors of one forward pass.

    inner_layers[0] is the layer input and inner_layers[t+1] the state
    after timestep t, so the list has timestep_count + 1 entries.
    """

    inner_layers: list[np.ndarray]


def _square_slots(n: int) -> list[GateSlot]:
    slots = []
    for lam in range(2 * n - 3):
        lo = max(lam - (n - 2), (n - 2) - lam)
        for i in range(lo, n - 1, 2):
            slots.append(GateSlot(lam, i))
    return slots


def _prune_to_light_cone(slots: list[GateSlot], n_out: int) -> list[GateSlot]:
    """Keep only gates that can influence output wires 0..n_out-1."""
    reach = set(range(n_out))
    kept = []
    for slot in reversed(slots):
        if slot.wire in reach or slot.wire + 1 in reach:
            kept.append(slot)
            reach.add(slot.wire)
            reach.add(slot.wire + 1)
    kept.reverse()
    return kept


def build_schedule(n_in: int, n_out: int) -> PyramidSchedule:
    """Gate schedule for an n_in -> n_out layer."""
    if int(n_in) != n_in or int(n_out) != n_out:
        raise ValueError("wire counts must be integers")
    n_in, n_out = int(n_in), int(n_out)
    if n_out < 2 or n_out > n_in:
        raise ValueError(f"need 2 <= n_out <= n_in, got n_in={n_in}, n_out={n_out}")
    slots = _square_slots(n_in)
    if n_out < n_in:
        slots = _prune_to_light_cone(slots, n_out)
    expected = (2 * n_in - 1 - n_out) * n_out // 2
    if len(slots) != expected:
        raise AssertionError(f"slot count {len(slots)} != {expected}")
    return PyramidSchedule(n_in=n_in, n_out=n_out, slots=tuple(slots))


def _as_rng(seed_or_rng) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


def random_layer(n_in: int, n_out: int, seed_or_rng=0) -> PyramidLayer:
    """Layer with angles drawn uniformly from (-pi, pi)."""
    rng = _as_rng(seed_or_rng)
    schedule = build_schedule(n_in, n_out)
    angles = rng.uniform(-np.pi, np.pi, schedule.gate_count)
    return PyramidLayer(schedule, angles)


def apply_rotation_pair(theta: float, u: float, v: float) -> tuple[float, float]:
    """Rotate one coordinate pair by the canonical gate block."""
    c = np.cos(theta)
    s = np.sin(theta)
    return c * u + s * v, -s * u + c * v


def forward(
    layer: PyramidLayer,
    x,
    keep_trace: bool = False,
    stats: dict | None = None,
) -> tuple[np.ndarray, ForwardTrace | None]:
    """Apply the layer to x; cost is proportional to the gate count.

    Returns (y, trace) where y holds the first n_out coordinates of
    the final wire vector and trace is None unless keep_trace is set.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (layer.n_in,):
        raise ValueError(f"expected input of length {layer.n_in}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("input entries must be finite")
    zeta = x.copy()
    cos = np.cos(layer.angles)
    sin = np.sin(layer.angles)
    trace = [zeta.copy()] if keep_trace else None
    for wires, idx in layer.schedule.timestep_groups():
        u = zeta[wires]
        v = zeta[wires + 1]
        c = cos[idx]
        s = sin[idx]
        zeta[wires] = c * u + s * v
        zeta[wires + 1] = -s * u + c * v
        if stats is not None:
            stats["gate_visits"] = stats.get("gate_visits", 0) + len(idx)
        if keep_trace:
            trace.append(zeta.copy())
    y = zeta[: layer.n_out].copy()
    return y, (ForwardTrace(trace) if keep_trace else None)


def matrix_from_angles(layer: PyramidLayer) -> np.ndarray:
    """The n_out x n_in matrix w with w @ x == forward(layer, x).

    Built by pushing each standard basis vector through the layer. In
    the square case w is a rotation (orthogonal, det +1); rectangular
    layers give orthonormal rows.
    """
    n = layer.n_in
    cols = np.empty((layer.n_out, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        cols[:, j], _ = forward(layer, e)
    return cols


def angles_from_matrix(w) -> tuple[PyramidLayer, tuple[int, ...]]:
    """Recover a layer from a square orthogonal matrix.

    Peels timesteps from last to first; each gate's angle is the atan2
    of the two affected entries that zeroes one sub-diagonal element,
    reducing w to a diagonal of +-1. Gates compose to rotations only,
    so a det -1 input cannot be represented exactly: the returned sign
    mask lists the wires whose residual diagonal entry is -1, and

        matrix_from_angles(layer)[:, k] * -1  for k in mask

    reproduces w. For det +1 input the mask is empty.
    """
    w = as_matrix(w)
    if w.shape[0] != w.shape[1]:
        raise ValueError(f"angles_from_matrix requires a square matrix, got {w.shape}")
    n = w.shape[0]
    dev = float(np.max(np.abs(w.T @ w - np.eye(n))))
    if dev > 1e-8:
        raise ValueError(f"matrix is not orthogonal (deviation {dev:.3e})")
    schedule = build_schedule(n, n)
    r = w.copy()
    angles = np.zeros(schedule.gate_count)
    for k in reversed(range(schedule.gate_count)):
        lam, i = schedule.slots[k]
        col = (n - 2 - lam + i) // 2
        theta = float(np.arctan2(-r[i + 1, col], r[i, col]))
        c = np.cos(theta)
        s = np.sin(theta)
        top = c * r[i, :] - s * r[i + 1, :]
        bot = s * r[i, :] + c * r[i + 1, :]
        r[i, :] = top
        r[i + 1, :] = bot
        angles[k] = theta
    mask = tuple(k for k in range(n) if r[k, k] < 0.0)
    return PyramidLayer(schedule, angles), mask


def export_matrix(mat, path) -> None:
    """Write a matrix as CSV, one row per line, 17 significant digits."""
    mat = as_matrix(mat)
    with open(path, "w") as fh:
        for row in mat:
            fh.write(",".join(f"{v:.17g}" for v in row))
            fh.write("\n")
