"""Statevector simulator for the real-amplitude circuit family.

The simulator holds the full 2^n real amplitude vector (n <= 16) and
supports exactly the gates the pyramid layers need: the two-wire
rotation, X, Hadamard and CNOT. Basis convention: amplitude index b
has qubit k set iff bit k of b is set, so the unary state for wire i
is index 1 << i; bitstrings render most-significant qubit first.

With that convention the rotation gate acts on the unary coordinate
pair (wire i, wire j) exactly like the classical block in
`pyramid.apply_rotation_pair`, which is what makes the unary submatrix
of a pyramid equal the classical layer matrix. On a state printed as
|10> (the 1 on wire 1) a rotation of the pair (0, 1) by theta yields
sin(theta)|01> + cos(theta)|10>, the identity on the |00> and |11>
sectors.

Measurement is shot sampling from the squared amplitudes; the only
noise channel is an independent bit flip per measured bit. Error
mitigation discards outcomes outside the unary subspace. Two sign
recovery procedures are provided: three-run pairwise comparison with
quarter-turn mixer gates, and a single run with one extra comparison
qubit interfering the output against a uniform reference vector.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .network import Network, activate
from .pyramid import PyramidLayer, matrix_from_angles

MAX_QUBITS = 16
MAX_SUBMATRIX_QUBITS = 12
ANALYTIC = "analytic"


class MitigationError(RuntimeError):
    """Every shot was discarded; the run is unusable."""


class SignResolutionError(RuntimeError):
    """Comparator pairs with no counts left sign links unresolved."""

    def __init__(self, pairs):
        self.pairs = tuple(pairs)
        super().__init__(f"unresolved sign links at wire pairs {self.pairs}")


class StateVector:
    """Dense real amplitudes of an n-qubit register, starting at |0...0>."""

    def __init__(self, n_qubits: int):
        if not 1 <= n_qubits <= MAX_QUBITS:
            raise ValueError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits}")
        self.n_qubits = int(n_qubits)
        self.amps = np.zeros(2**self.n_qubits)
        self.amps[0] = 1.0

    def copy(self) -> "StateVector":
        out = StateVector(self.n_qubits)
        out.amps = self.amps.copy()
        return out

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def probabilities(self) -> np.ndarray:
        return self.amps**2

    def unary_coordinates(self) -> np.ndarray:
        """Amplitudes of the Hamming-weight-1 states, by wire index."""
        return self.amps[[1 << i for i in range(self.n_qubits)]].copy()

    def non_unary_mass(self) -> float:
        return float(1.0 - np.sum(self.unary_coordinates() ** 2))


@lru_cache(maxsize=4096)
def _rotation_pairs(n: int, i: int, j: int) -> tuple[np.ndarray, np.ndarray]:
    idx = np.arange(2**n)
    sel = ((idx >> i) & 1 == 1) & ((idx >> j) & 1 == 0)
    a = idx[sel]
    b = a - (1 << i) + (1 << j)
    return a, b


def _check_wire(state: StateVector, q: int) -> None:
    if not 0 <= q < state.n_qubits:
        raise ValueError(f"wire {q} out of range for {state.n_qubits} qubits")


def apply_rbs(state: StateVector, i: int, j: int, theta: float) -> None:
    """Planar rotation of the (1 on wire i, 1 on wire j) sectors.

    Acts as the identity wherever wires i and j are both 0 or both 1,
    so the Hamming weight (and the norm) is preserved.
    """
    _check_wire(state, i)
    _check_wire(state, j)
    if i == j:
        raise ValueError("rotation needs two distinct wires")
    a, b = _rotation_pairs(state.n_qubits, i, j)
    c = np.cos(theta)
    s = np.sin(theta)
    u = state.amps[a]
    v = state.amps[b]
    state.amps[a] = c * u + s * v
    state.amps[b] = -s * u + c * v


def apply_x(state: StateVector, q: int) -> None:
    _check_wire(state, q)
    idx = np.arange(state.amps.size)
    state.amps = state.amps[idx ^ (1 << q)]


def apply_h(state: StateVector, q: int) -> None:
    _check_wire(state, q)
    idx = np.arange(state.amps.size)
    low = idx[(idx >> q) & 1 == 0]
    high = low | (1 << q)
    u = state.amps[low].copy()
    v = state.amps[high]
    inv = 1.0 / np.sqrt(2.0)
    state.amps[low] = (u + v) * inv
    state.amps[high] = (u - v) * inv


def apply_cnot(state: StateVector, control: int, target: int) -> None:
    _check_wire(state, control)
    _check_wire(state, target)
    if control == target:
        raise ValueError("control and target must differ")
    idx = np.arange(state.amps.size)
    a = idx[((idx >> control) & 1 == 1) & ((idx >> target) & 1 == 0)]
    b = a | (1 << target)
    state.amps[a], state.amps[b] = state.amps[b].copy(), state.amps[a].copy()


@dataclass
class LoaderAngles:
    """Cascade angles preparing a unit vector in the unary basis."""

    alphas: np.ndarray


@dataclass
class NoiseModel:
    """Independent bit flip with probability bitflip_p per measured bit."""

    bitflip_p: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.bitflip_p < 1.0:
            raise ValueError(f"bitflip_p must be in [0, 1), got {self.bitflip_p}")


@dataclass
class TomographyConfig:
    """Shot budget (or ANALYTIC for exact probabilities) and seed.

    delta records the nominal amplitude precision the shot count was
    derived from; it is bookkeeping only.
    """

    shots: int | str = ANALYTIC
    seed: int = 0
    delta: float | None = None

    def __post_init__(self):
        if self.shots != ANALYTIC:
            if int(self.shots) != self.shots or self.shots < 1:
                raise ValueError(f"shots must be >= 1 or ANALYTIC, got {self.shots!r}")
            self.shots = int(self.shots)

    @property
    def analytic(self) -> bool:
        return self.shots == ANALYTIC


def load_angles(x) -> LoaderAngles:
    """Cascade angles for a unit vector, computed recursively.

    alpha_0 = arccos(x_0) and each later angle divides out the running
    product of sines; once that product falls below 1e-12 the
    remaining angles are zero (no mass left to place). The final angle
    is resolved with atan2 so the sign of the last component survives.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size < 2:
        raise ValueError(f"need a vector of length >= 2, got shape {x.shape}")
    norm = float(np.linalg.norm(x))
    if abs(norm - 1.0) > 1e-9:
        raise ValueError(f"input must be normalized, got ||x|| = {norm!r}")
    n = x.size
    alphas = np.zeros(n - 1)
    prod = 1.0
    for k in range(n - 1):
        if prod < 1e-12:
            break
        if k < n - 2:
            alphas[k] = np.arccos(np.clip(x[k] / prod, -1.0, 1.0))
        else:
            alphas[k] = np.arctan2(x[k + 1], x[k])
        prod *= np.sin(alphas[k])
    return LoaderAngles(alphas)


def _apply_cascade(state: StateVector, alphas: np.ndarray, adjoint: bool = False) -> None:
    """Rotation cascade on pairs (0,1), (1,2), ... without the X gate."""
    n = alphas.size + 1
    if adjoint:
        for k in reversed(range(n - 1)):
            apply_rbs(state, k, k + 1, alphas[k])
    else:
        for k in range(n - 1):
            apply_rbs(state, k, k + 1, -alphas[k])


def apply_loader(state: StateVector, angles: LoaderAngles) -> None:
    """Prepare sum_i x_i |e_i> from the ground state: X then a cascade."""
    if abs(state.amps[0] - 1.0) > 1e-12 or abs(state.norm() - 1.0) > 1e-12:
        raise ValueError("loader requires the ground state")
    if angles.alphas.size + 1 > state.n_qubits:
        raise ValueError("loader is wider than the register")
    apply_x(state, 0)
    _apply_cascade(state, angles.alphas)


def _apply_pyramid(state: StateVector, layer: PyramidLayer) -> None:
    for slot, theta in zip(layer.schedule.slots, layer.angles):
        apply_rbs(state, slot.wire, slot.wire + 1, theta)


def pyramid_output_state(layer: PyramidLayer, x) -> StateVector:
    """Load x, run the pyramid, return the resulting state."""
    state = StateVector(layer.n_in)
    apply_loader(state, load_angles(x))
    _apply_pyramid(state, layer)
    return state


def unary_submatrix(layer: PyramidLayer) -> np.ndarray:
    """Layer matrix read off the simulator, one basis state per column.

    Equals `matrix_from_angles` because rotations never move amplitude
    out of the unary subspace.
    """
    n = layer.n_in
    if n > MAX_SUBMATRIX_QUBITS:
        raise ValueError(f"unary_submatrix capped at {MAX_SUBMATRIX_QUBITS} qubits, got {n}")
    out = np.empty((layer.n_out, n))
    for j in range(n):
        state = StateVector(n)
        state.amps[0] = 0.0
        state.amps[1 << j] = 1.0
        _apply_pyramid(state, layer)
        out[:, j] = state.unary_coordinates()[: layer.n_out]
    return out


def unary_leakage(layer: PyramidLayer) -> float:
    """Largest amplitude mass outside the unary subspace over basis inputs."""
    n = layer.n_in
    if n > MAX_SUBMATRIX_QUBITS:
        raise ValueError(f"unary_leakage capped at {MAX_SUBMATRIX_QUBITS} qubits, got {n}")
    worst = 0.0
    for j in range(n):
        state = StateVector(n)
        state.amps[0] = 0.0
        state.amps[1 << j] = 1.0
        _apply_pyramid(state, layer)
        worst = max(worst, abs(state.non_unary_mass()))
    return worst


def _sample_counts(
    state: StateVector, shots: int, rng: np.random.Generator, bitflip_p: float
) -> dict[str, int]:
    probs = state.probabilities()
    probs = probs / probs.sum()
    outcomes = rng.choice(probs.size, size=shots, p=probs)
    if bitflip_p > 0.0:
        n = state.n_qubits
        flips = rng.random((shots, n)) < bitflip_p
        mask = (flips << np.arange(n)).sum(axis=1)
        outcomes = outcomes ^ mask
    values, counts = np.unique(outcomes, return_counts=True)
    width = state.n_qubits
    return {format(int(v), f"0{width}b"): int(c) for v, c in zip(values, counts)}


def sample_shots(
    state: StateVector, cfg: TomographyConfig, noise: NoiseModel | None = None
) -> dict[str, int]:
    """Draw cfg.shots outcomes, then flip each measured bit independently."""
    if cfg.analytic:
        raise ValueError("sample_shots needs a finite shot count")
    rng = np.random.default_rng(cfg.seed)
    p = noise.bitflip_p if noise is not None else 0.0
    return _sample_counts(state, cfg.shots, rng, p)


def mitigate_unary(counts: dict[str, int]) -> tuple[dict[str, int], float]:
    """Keep only Hamming-weight-1 outcomes; returns (kept, discard fraction)."""
    total = sum(counts.values())
    if total == 0:
        raise MitigationError("no shots to mitigate")
    kept = {bits: c for bits, c in counts.items() if bits.count("1") == 1}
    kept_total = sum(kept.values())
    if kept_total == 0:
        raise MitigationError("all shots fell outside the unary subspace")
    return kept, (total - kept_total) / total


def _unary_probs_from_counts(counts: dict[str, int], n: int, mitigate: bool) -> np.ndarray:
    if mitigate:
        counts, _ = mitigate_unary(counts)
    total = sum(counts.values())
    probs = np.zeros(n)
    for i in range(n):
        probs[i] = counts.get(format(1 << i, f"0{n}b"), 0) / total
    return probs


def _spawned_rngs(seed: int, k: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(k)]


def tomography_pairwise(
    layer: PyramidLayer,
    x,
    cfg: TomographyConfig,
    noise: NoiseModel | None = None,
    mitigate: bool = True,
) -> np.ndarray:
    """Three-run sign recovery with quarter-turn mixer gates.

    Run (a) estimates every squared amplitude. Runs (b) and (c) append
    mixers on wire pairs (0,1),(2,3),... and (1,2),(3,4),...; the
    mixer maps the pair to ((y_i - y_j)/sqrt2, (y_i + y_j)/sqrt2), so
    observing the first outcome more often than the second means the
    two signs differ. Signs are chained from the convention that the
    first component is positive, so the result matches the true output
    only up to a global sign.
    """
    base = pyramid_output_state(layer, x)
    n_out = layer.n_out
    plain = base.copy()
    mixed = []
    for offset in (0, 1):
        variant = base.copy()
        for i in range(offset, n_out - 1, 2):
            apply_rbs(variant, i, i + 1, -np.pi / 4.0)
        mixed.append(variant)

    if cfg.analytic:
        probs = [s.probabilities() for s in (plain, *mixed)]
        unary = [
            np.array([p[1 << i] for i in range(layer.n_in)])[:n_out] for p in probs
        ]
    else:
        rngs = _spawned_rngs(cfg.seed, 3)
        p = noise.bitflip_p if noise is not None else 0.0
        unary = []
        for state, rng in zip((plain, *mixed), rngs):
            counts = _sample_counts(state, cfg.shots, rng, p)
            unary.append(
                _unary_probs_from_counts(counts, layer.n_in, mitigate)[:n_out]
            )

    magnitudes = np.sqrt(unary[0])
    signs = np.ones(n_out)
    unresolved = []
    for j in range(n_out - 1):
        run = unary[1] if j % 2 == 0 else unary[2]
        p_first, p_second = run[j], run[j + 1]
        if p_first == 0.0 and p_second == 0.0:
            unresolved.append((j, j + 1))
            continue
        flip = -1.0 if p_first > p_second else 1.0
        signs[j + 1] = signs[j] * flip
    if unresolved:
        raise SignResolutionError(unresolved)
    return signs * magnitudes


def tomography_ancilla(
    layer: PyramidLayer,
    x,
    cfg: TomographyConfig,
    noise: NoiseModel | None = None,
    mitigate: bool = True,
) -> np.ndarray:
    """Single-run sign recovery with one extra comparison qubit.

    Prepares (|0>|0> + |1>|e_0>)/sqrt2, runs loader and pyramid (the
    ground branch is invariant, which realizes the conditioning for
    free), flips the comparison qubit, loads the uniform reference
    vector on the branch that was empty via a cascade-adjoint/CNOT/
    cascade sandwich, and interferes both branches with a Hadamard.
    The probability gap Pr[0, e_j] - Pr[1, e_j] equals y_j / sqrt(n),
    giving the sign directly and the magnitude from whichever branch
    matches the sign.
    """
    n = layer.n_in
    if n + 1 > MAX_QUBITS:
        raise ValueError(f"needs {n + 1} qubits, cap is {MAX_QUBITS}")
    anc = n
    state = StateVector(n + 1)
    apply_h(state, anc)
    apply_cnot(state, anc, 0)
    _apply_cascade(state, load_angles(x).alphas)
    _apply_pyramid(state, layer)
    apply_x(state, anc)
    uniform = load_angles(np.full(n, 1.0 / np.sqrt(n))).alphas
    _apply_cascade(state, uniform, adjoint=True)
    apply_cnot(state, anc, 0)
    _apply_cascade(state, uniform)
    apply_h(state, anc)

    if cfg.analytic:
        p = state.probabilities()
        pr0 = np.array([p[1 << j] for j in range(n)])
        pr1 = np.array([p[(1 << j) | (1 << anc)] for j in range(n)])
    else:
        rng = np.random.default_rng(cfg.seed)
        flip_p = noise.bitflip_p if noise is not None else 0.0
        counts = _sample_counts(state, cfg.shots, rng, flip_p)
        if mitigate:
            # unary on the register; the comparison qubit may be either value
            kept = {b: c for b, c in counts.items() if b[1:].count("1") == 1}
            if not kept:
                raise MitigationError("all shots fell outside the unary subspace")
            counts = kept
        total = sum(counts.values())
        pr0 = np.zeros(n)
        pr1 = np.zeros(n)
        for j in range(n):
            reg = format(1 << j, f"0{n}b")
            pr0[j] = counts.get("0" + reg, 0) / total
            pr1[j] = counts.get("1" + reg, 0) / total

    inv_sqrt_n = 1.0 / np.sqrt(n)
    positive = pr0 >= pr1
    estimates = np.where(
        positive,
        2.0 * np.sqrt(np.maximum(pr0, 0.0)) - inv_sqrt_n,
        inv_sqrt_n - 2.0 * np.sqrt(np.maximum(pr1, 0.0)),
    )
    return estimates[: layer.n_out]


def multilayer_quantum_inference(
    net: Network,
    x,
    cfg: TomographyConfig,
    noise: NoiseModel | None = None,
    procedure: str = "ancilla",
    mitigate: bool = True,
) -> np.ndarray:
    """Run every layer on the simulator with classical glue between.

    Per layer: normalize the input and remember the norm, estimate the
    layer output by tomography, rescale, add the bias and apply the
    nonlinearity classically, then reload for the next layer. The
    default procedure is the comparison-qubit one because it recovers
    absolute signs; the pairwise procedure is only correct up to a
    global sign per layer.
    """
    if procedure not in ("ancilla", "pairwise"):
        raise ValueError(f"unknown procedure {procedure!r}")
    tomography = tomography_ancilla if procedure == "ancilla" else tomography_pairwise
    a = np.asarray(x, dtype=np.float64)
    for li, spec in enumerate(net.layers):
        norm = float(np.linalg.norm(a))
        if norm < 1e-12:
            raise ValueError(f"layer {li} input is numerically zero")
        layer_cfg = cfg if cfg.analytic else TomographyConfig(
            shots=cfg.shots, seed=cfg.seed + 7919 * li, delta=cfg.delta
        )
        estimate = tomography(spec.rotations, a / norm, layer_cfg, noise, mitigate)
        z = norm * estimate
        if spec.bias is not None:
            z = z + spec.bias
        a = activate(spec.activation, z)
    return a


def quantum_classical_gap(layer: PyramidLayer) -> float:
    """Max absolute difference between simulator and classical matrices."""
    return float(np.max(np.abs(unary_submatrix(layer) - matrix_from_angles(layer))))
