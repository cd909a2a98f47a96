"""Acceptance suite: one test per criterion, one printed line each.

Run with `pytest tests/test_acceptance.py -s` to see the verdict lines.
MNIST-dependent criteria fall back to synthetic data when the IDX
files are absent (see README for where to place them).
"""

import time

import numpy as np
import pytest

from pyramidnet.baselines import SVBConfig, stiefel_update, svb_update
from pyramidnet.data import (
    Dataset,
    find_mnist,
    load_mnist_split,
    normalize_rows,
    synth_blobs,
)
from pyramidnet.linalg import qr
from pyramidnet.network import (
    loss_and_delta,
    network_backward,
    network_forward,
    random_network,
    sgd_step,
)
from pyramidnet.pyramid import (
    build_schedule,
    forward,
    matrix_from_angles,
    random_layer,
)
from pyramidnet.qsim import (
    ANALYTIC,
    NoiseModel,
    StateVector,
    TomographyConfig,
    apply_loader,
    load_angles,
    mitigate_unary,
    multilayer_quantum_inference,
    pyramid_output_state,
    sample_shots,
    tomography_ancilla,
    tomography_pairwise,
    unary_leakage,
    unary_submatrix,
)
from pyramidnet.training import TrainConfig, dense_train_baseline, train


def verdict(name: str, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"{name}: {detail}"


def unit(rng, n):
    x = rng.normal(size=n)
    return x / np.linalg.norm(x)


def test_parameter_counts():
    t0 = time.perf_counter()
    square = build_schedule(8, 8)
    rect = build_schedule(8, 4)
    ok = (
        square.gate_count == 28
        and square.timestep_count == 13
        and rect.gate_count == 22
    )
    verdict(
        "parameter-counts", ok,
        f"(8,8): {square.gate_count} gates / {square.timestep_count} timesteps, "
        f"(8,4): {rect.gate_count} gates, {time.perf_counter() - t0:.2f}s",
    )


def test_exact_orthogonality_under_training_vs_svb_drift():
    rng = np.random.default_rng(8)
    net = random_network([8, 8], seed_or_rng=8, activation="identity", loss="mse")
    w_svb, _ = qr(rng.normal(size=(8, 8)))
    cfg = SVBConfig(0.05)
    eye = np.eye(8)
    worst_pyramid = 0.0
    worst_svb = 0.0
    for _ in range(1000):
        x = rng.normal(size=8)
        target = rng.normal(size=8)
        out, traces, post = network_forward(net, x)
        _, delta = loss_and_delta(out, target, "mse")
        grads = network_backward(net, traces, post, delta)
        sgd_step(net, grads, 0.05)
        w = matrix_from_angles(net.layers[0].rotations)
        worst_pyramid = max(worst_pyramid, float(np.max(np.abs(w.T @ w - eye))))

        g = np.outer(w_svb @ x - target, x)
        w_svb = svb_update(w_svb, g, 0.05, cfg)
        worst_svb = max(worst_svb, float(np.max(np.abs(w_svb.T @ w_svb - eye))))
    ok = worst_pyramid <= 1e-10 and worst_svb > 1e-6
    verdict(
        "exact-orthogonality-under-training", ok,
        f"pyramid max dev {worst_pyramid:.2e} <= 1e-10, "
        f"svb(eps=0.05) max dev {worst_svb:.2e} > 1e-6",
    )


def test_gradient_correctness_finite_differences():
    h = 1e-6
    worst = 0.0
    for seed in range(20):
        rng = np.random.default_rng(1000 + seed)
        net = random_network([16, 16, 4], seed_or_rng=rng)
        x = rng.normal(size=16)
        target = int(rng.integers(0, 4))
        out, traces, post = network_forward(net, x)
        _, delta = loss_and_delta(out, target, net.loss)
        grads = network_backward(net, traces, post, delta)

        def loss_now():
            o, _, _ = network_forward(net, x)
            return loss_and_delta(o, target, net.loss)[0]

        for li, spec in enumerate(net.layers):
            angles = spec.rotations.angles
            for ai in range(angles.size):
                saved = angles[ai]
                angles[ai] = saved + h
                hi = loss_now()
                angles[ai] = saved - h
                lo = loss_now()
                angles[ai] = saved
                fd = (hi - lo) / (2 * h)
                rel = abs(grads.angles[li][ai] - fd) / max(abs(fd), 1e-4)
                worst = max(worst, rel)
    ok = worst <= 1e-5
    verdict(
        "gradient-correctness", ok,
        f"[16,16,4] x 20 seeds, worst relative error {worst:.2e} <= 1e-5",
    )


def test_quantum_classical_equivalence():
    rng = np.random.default_rng(4)
    worst_gap = 0.0
    worst_leak = 0.0
    for n in range(2, 11):
        for _ in range(50):
            layer = random_layer(n, n, rng)
            gap = float(np.max(np.abs(unary_submatrix(layer) - matrix_from_angles(layer))))
            worst_gap = max(worst_gap, gap)
            worst_leak = max(worst_leak, unary_leakage(layer))
    ok = worst_gap <= 1e-10 and worst_leak <= 1e-12
    verdict(
        "quantum-classical-equivalence", ok,
        f"n in 2..10, 50 layers each: max gap {worst_gap:.2e} <= 1e-10, "
        f"max leakage {worst_leak:.2e} <= 1e-12",
    )


def test_loader_fidelity():
    rng = np.random.default_rng(5)
    worst = 0.0
    for n in range(2, 11):
        for _ in range(100):
            x = unit(rng, n)
            state = StateVector(n)
            apply_loader(state, load_angles(x))
            worst = max(worst, float(np.max(np.abs(state.unary_coordinates() - x))))
        for edge in (np.eye(n)[0], np.eye(n)[n - 1], -np.eye(n)[n - 1]):
            state = StateVector(n)
            apply_loader(state, load_angles(edge))
            worst = max(worst, float(np.max(np.abs(state.unary_coordinates() - edge))))
    ok = worst <= 1e-10
    verdict("loader-fidelity", ok, f"100 vectors per n in 2..10, worst {worst:.2e} <= 1e-10")


def test_tomography_accuracy():
    n, delta = 8, 0.05
    shots = round(10 * n / delta**2)
    rng = np.random.default_rng(2024)
    pair_ok = anc_ok = 0
    trials = 100
    for trial in range(trials):
        layer = random_layer(n, n, rng)
        x = unit(rng, n)
        y = matrix_from_angles(layer) @ x
        cfg = TomographyConfig(shots=shots, seed=trial, delta=delta)
        est_pair = tomography_pairwise(layer, x, cfg)
        err_pair = min(np.max(np.abs(est_pair - y)), np.max(np.abs(est_pair + y)))
        est_anc = tomography_ancilla(layer, x, cfg)
        err_anc = float(np.max(np.abs(est_anc - y)))
        pair_ok += int(err_pair <= delta)
        anc_ok += int(err_anc <= delta)

    layer = random_layer(n, n, rng)
    x = unit(rng, n)
    y = matrix_from_angles(layer) @ x
    analytic = TomographyConfig(shots=ANALYTIC)
    est_pair = tomography_pairwise(layer, x, analytic)
    analytic_err = max(
        min(np.max(np.abs(est_pair - y)), np.max(np.abs(est_pair + y))),
        float(np.max(np.abs(tomography_ancilla(layer, x, analytic) - y))),
    )
    ok = pair_ok >= 95 and anc_ok >= 95 and analytic_err <= 1e-10
    verdict(
        "tomography-accuracy", ok,
        f"shots={shots}, delta={delta}: pairwise {pair_ok}/100, ancilla {anc_ok}/100 "
        f">= 95, analytic err {analytic_err:.2e} <= 1e-10",
    )


def test_error_mitigation_benefit():
    n = 8
    rng = np.random.default_rng(77)
    layer = random_layer(n, n, rng)
    x = unit(rng, n)
    ideal = np.abs(matrix_from_angles(layer) @ x)
    state = pyramid_output_state(layer, x)
    noise = NoiseModel(bitflip_p=0.01)
    wins = 0
    trials = 100
    for trial in range(trials):
        counts = sample_shots(state, TomographyConfig(shots=100_000, seed=trial), noise)
        total = sum(counts.values())
        raw = np.array(
            [counts.get(format(1 << i, f"0{n}b"), 0) / total for i in range(n)]
        )
        kept, _ = mitigate_unary(counts)
        kept_total = sum(kept.values())
        fixed = np.array(
            [kept.get(format(1 << i, f"0{n}b"), 0) / kept_total for i in range(n)]
        )
        err_raw = np.max(np.abs(np.sqrt(raw) - ideal))
        err_fixed = np.max(np.abs(np.sqrt(fixed) - ideal))
        wins += int(err_fixed < err_raw)
    ok = wins >= 80
    verdict(
        "error-mitigation-benefit", ok,
        f"p=0.01, n=8, 1e5 shots: mitigated closer in {wins}/100 trials >= 80",
    )


def _blobs_pair(dims, seed, n_train=500, n_test=200, separation=6.0):
    return (
        synth_blobs(n_train, dims, separation, seed=seed),
        synth_blobs(n_test, dims, separation, seed=seed + 1),
    )


def _four_class_blobs(n_per_class, dims, separation, seed):
    """4-class synthetic stand-in for the 4-output architectures."""
    rng = np.random.default_rng(seed)
    feats, labels = [], []
    for k in range(4):
        center = np.zeros(dims)
        axis, sign = divmod(k, 2)
        center[axis] = (1.0 if sign else -1.0) * separation / 2
        feats.append(rng.normal(size=(n_per_class, dims)) + center)
        labels.append(np.full(n_per_class, k))
    return Dataset(np.vstack(feats), np.concatenate(labels))


def test_mnist_replication_or_synthetic_fallback():
    t0 = time.perf_counter()
    mnist = find_mnist()
    if mnist is not None:
        results = {}
        nets = {}
        for arch in ([4, 2], [8, 2], [4, 4, 2]):
            train_set, test_set = load_mnist_split(
                classes=(6, 9), pca_k=arch[0], train_n=5000, test_n=1000
            )
            net = random_network(arch, seed_or_rng=1)
            metrics = train(net, train_set, test_set, TrainConfig(1.0, 20, 50, seed=1))
            results[tuple(arch)] = metrics.final_accuracy()
            nets[tuple(arch)] = (net, test_set)
        ok = all(acc >= 0.95 for acc in results.values())
        net, test_set = nets[(4, 4, 2)]
        detail = ", ".join(f"{list(a)}: {v:.3f}" for a, v in results.items())
    else:
        train_set, test_set = _blobs_pair(4, seed=100)
        net = random_network([4, 2], seed_or_rng=1)
        metrics = train(net, train_set, test_set, TrainConfig(1.0, 10, 50, seed=1))
        ok = metrics.final_accuracy() >= 0.99
        detail = f"MNIST absent; blobs fallback [4,2]: {metrics.final_accuracy():.3f} >= 0.99"
        train_set, test_set = _blobs_pair(4, seed=104)
        net = random_network([4, 4, 2], seed_or_rng=1)
        train(net, train_set, test_set, TrainConfig(1.0, 10, 50, seed=1))

    # analytic quantum inference of the trained [4,4,2] net vs classical
    agree = 0
    cfg = TomographyConfig(shots=ANALYTIC)
    for x in test_set.features:
        classical, _, _ = network_forward(net, x)
        quantum = multilayer_quantum_inference(net, x, cfg)
        agree += int(np.argmax(classical) == np.argmax(quantum))
    agreement = agree / len(test_set.features)
    ok = ok and agreement >= 0.99
    verdict(
        "mnist-replication", ok,
        f"{detail}; analytic quantum agreement {agreement:.3f} >= 0.99; "
        f"{time.perf_counter() - t0:.0f}s",
    )


def test_svb_comparison_16_4():
    t0 = time.perf_counter()
    mnist = find_mnist()
    if mnist is not None:
        train_set, test_set = load_mnist_split(
            classes=(0, 1, 2, 3), pca_k=16, train_n=5000, test_n=1000
        )
        source = "MNIST classes 0-3"
    else:
        train_set = normalize_rows(_four_class_blobs(300, 16, 10.0, seed=50))
        test_set = normalize_rows(_four_class_blobs(100, 16, 10.0, seed=51))
        source = "MNIST absent; 4-class blobs"
    cfg = TrainConfig(learning_rate=2.0, epochs=20, batch_size=50, seed=2)
    net = random_network([16, 4], seed_or_rng=2)
    pyramid_metrics = train(net, train_set, test_set, cfg)
    svb_metrics = dense_train_baseline(
        [16, 4], train_set, test_set, cfg, updater="svb", svb_epsilon=0.05
    )
    p_acc = pyramid_metrics.final_accuracy()
    s_acc = svb_metrics.final_accuracy()
    gap = abs(p_acc - s_acc) * 100
    ok = p_acc >= 0.90 and s_acc >= 0.90 and gap <= 3.0
    verdict(
        "svb-comparison", ok,
        f"{source}: pyramid {p_acc:.3f}, svb {s_acc:.3f} (>= 0.90), "
        f"gap {gap:.1f}pts <= 3; {time.perf_counter() - t0:.0f}s",
    )


def test_complexity_scaling():
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    ratios = {}
    for n in (64, 512):
        layer = random_layer(n, n, rng)
        x = rng.normal(size=n)
        target = rng.normal(size=n)
        w, _ = qr(rng.normal(size=(n, n)))
        cfg = SVBConfig(0.05)

        def pyramid_step():
            y, trace = forward(layer, x, keep_trace=True)
            _, delta = loss_and_delta(y, target, "mse")
            from pyramidnet.network import layer_backward
            from pyramidnet.pyramid import canonical_angles

            grads, _ = layer_backward(layer, trace, delta)
            layer.angles = canonical_angles(layer.angles - 0.01 * grads)

        def svb_step():
            nonlocal w
            y = w @ x
            _, delta = loss_and_delta(y, target, "mse")
            w = svb_update(w, np.outer(delta, x), 0.01, cfg)

        def median_ms(step):
            step()  # warm-up
            times = []
            for _ in range(5):
                s = time.perf_counter()
                step()
                times.append((time.perf_counter() - s) * 1e3)
            return float(np.median(times))

        ratios[n] = median_ms(svb_step) / median_ms(pyramid_step)
    trend = ratios[512] / ratios[64]
    ok = trend >= 2.0
    verdict(
        "complexity-scaling", ok,
        f"svb/pyramid ratio: n=64 {ratios[64]:.1f}, n=512 {ratios[512]:.1f}, "
        f"trend {trend:.1f}x >= 2x; {time.perf_counter() - t0:.0f}s",
    )


def test_stiefel_updater():
    rng = np.random.default_rng(6)
    w, _ = qr(rng.normal(size=(8, 8)))
    worst = 0.0
    for _ in range(1000):
        g = rng.normal(size=(8, 8))
        w = stiefel_update(w, g, 0.05)
        worst = max(worst, float(np.max(np.abs(w.T @ w - np.eye(8)))))
    m = rng.normal(size=(6, 6))
    g_sym = (m + m.T) / 2
    fixed = stiefel_update(np.eye(6), g_sym, 0.3)
    exact = bool(np.array_equal(fixed, np.eye(6)))
    ok = worst <= 1e-8 and exact
    verdict(
        "stiefel-updater", ok,
        f"1000 updates worst dev {worst:.2e} <= 1e-8, symmetric fixed point exact: {exact}",
    )
