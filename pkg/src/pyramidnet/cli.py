"""Command-line entry point.

Commands: train, qsim-verify, tomo-demo, bench-scaling, export-matrix.
Flags may also come from a flat JSON file via --config; explicit flags
win. Exit codes: 0 success, 2 bad configuration, 3 missing data,
4 check failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import data as data_mod
from . import qsim
from .baselines import SVBConfig, svb_update
from .linalg import qr
from .network import layer_backward, loss_and_delta, random_network, sgd_step
from .network import network_backward, network_forward, zero_gradients
from .pyramid import (
    angles_from_matrix,
    canonical_angles,
    export_matrix,
    forward,
    matrix_from_angles,
    random_layer,
)
from .training import TrainConfig, dense_train_baseline, train

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_CHECK = 4


class ConfigError(ValueError):
    pass


class DataError(RuntimeError):
    pass


class CheckError(RuntimeError):
    pass


def _merge_config(args: argparse.Namespace, defaults: dict) -> dict:
    """Config file values fill in flags the user left unset."""
    merged = dict(defaults)
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                file_values = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        unknown = set(file_values) - set(defaults)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        merged.update(file_values)
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


def _parse_int_list(text: str, what: str) -> list[int]:
    try:
        return [int(part) for part in str(text).split(",") if part != ""]
    except ValueError as exc:
        raise ConfigError(f"bad {what}: {text!r}") from exc


TRAIN_DEFAULTS = {
    "arch": "4,2",
    "data": "synthetic",
    "data_dir": None,
    "classes": "6,9",
    "pca": None,
    "lr": 1.0,
    "epochs": 15,
    "batch_size": 50,
    "seed": 1,
    "updater": "pyramid",
    "svb_epsilon": 0.05,
    "train_n": 5000,
    "test_n": 1000,
    "blobs_per_class": 500,
    "separation": 6.0,
    "out": "metrics.csv",
    "eval_per_minibatch": False,
}


def _load_train_data(cfg: dict, arch: list[int]):
    if cfg["data"] == "synthetic":
        dims = arch[0]
        n = int(cfg["blobs_per_class"])
        train_set = data_mod.synth_blobs(n, dims, cfg["separation"], seed=int(cfg["seed"]))
        test_set = data_mod.synth_blobs(
            max(n // 4, 1), dims, cfg["separation"], seed=int(cfg["seed"]) + 1
        )
        return train_set, test_set
    if cfg["data"] == "mnist":
        classes = _parse_int_list(cfg["classes"], "classes")
        pca_k = int(cfg["pca"]) if cfg["pca"] is not None else arch[0]
        if pca_k != arch[0]:
            raise ConfigError(f"pca width {pca_k} must match arch input {arch[0]}")
        try:
            return data_mod.load_mnist_split(
                cfg["data_dir"], classes, pca_k,
                train_n=int(cfg["train_n"]), test_n=int(cfg["test_n"]),
            )
        except FileNotFoundError as exc:
            raise DataError(str(exc)) from exc
    raise ConfigError(f"unknown data source {cfg['data']!r}")


def cmd_train(args) -> int:
    cfg = _merge_config(args, TRAIN_DEFAULTS)
    arch = _parse_int_list(cfg["arch"], "architecture")
    if len(arch) < 2 or any(b > a for a, b in zip(arch, arch[1:])) or min(arch) < 2:
        raise ConfigError(f"architecture must be a non-widening chain of sizes >= 2: {arch}")
    if cfg["updater"] not in ("pyramid", "plain", "svb", "stiefel"):
        raise ConfigError(f"unknown updater {cfg['updater']!r}")
    train_set, test_set = _load_train_data(cfg, arch)
    tc = TrainConfig(
        learning_rate=float(cfg["lr"]),
        epochs=int(cfg["epochs"]),
        batch_size=int(cfg["batch_size"]),
        seed=int(cfg["seed"]),
    )
    if cfg["updater"] == "pyramid":
        net = random_network(arch, seed_or_rng=tc.seed)
        metrics = train(net, train_set, test_set, tc,
                        eval_each_minibatch=bool(cfg["eval_per_minibatch"]))
    else:
        metrics = dense_train_baseline(
            arch, train_set, test_set, tc,
            updater=cfg["updater"], svb_epsilon=float(cfg["svb_epsilon"]),
            eval_each_minibatch=bool(cfg["eval_per_minibatch"]),
        )
    metrics.to_csv(cfg["out"])
    print(f"final_test_accuracy={metrics.final_accuracy():.4f}")
    print(f"metrics_csv={cfg['out']}")
    return EXIT_OK


QSIM_DEFAULTS = {
    "min_n": 2,
    "max_n": 10,
    "seed": 0,
    "loader_trials": 20,
    "inject_fault": False,
}


def cmd_qsim_verify(args) -> int:
    cfg = _merge_config(args, QSIM_DEFAULTS)
    min_n, max_n = int(cfg["min_n"]), int(cfg["max_n"])
    if not 2 <= min_n <= max_n:
        raise ConfigError(f"need 2 <= min_n <= max_n, got {min_n}..{max_n}")
    if max_n > qsim.MAX_SUBMATRIX_QUBITS:
        raise ConfigError(
            f"max_n {max_n} exceeds the {qsim.MAX_SUBMATRIX_QUBITS}-qubit submatrix cap"
        )
    rng = np.random.default_rng(int(cfg["seed"]))
    failed = False

    def report(name: str, value: float, bound: float) -> None:
        nonlocal failed
        ok = value <= bound
        failed = failed or not ok
        print(f"{name}={'pass' if ok else 'fail'}:{value:.3e}")

    for n in range(min_n, max_n + 1):
        layer = random_layer(n, n, rng)
        gap = qsim.quantum_classical_gap(layer)
        if cfg["inject_fault"] and n == min_n:
            gap += 1.0
        report(f"equivalence_n{n}", gap, 1e-10)
        report(f"leakage_n{n}", qsim.unary_leakage(layer), 1e-12)

        worst_loader = 0.0
        for _ in range(int(cfg["loader_trials"])):
            x = rng.normal(size=n)
            x /= np.linalg.norm(x)
            state = qsim.StateVector(n)
            qsim.apply_loader(state, qsim.load_angles(x))
            worst_loader = max(
                worst_loader, float(np.max(np.abs(state.unary_coordinates() - x)))
            )
        report(f"loader_n{n}", worst_loader, 1e-10)

        state = qsim.pyramid_output_state(layer, x)
        report(f"norm_n{n}", abs(state.norm() - 1.0), 1e-12)

    return EXIT_CHECK if failed else EXIT_OK


TOMO_DEFAULTS = {
    "n": 8,
    "shots": "analytic",
    "noise_p": 0.0,
    "seed": 0,
    "delta": 0.05,
}


def cmd_tomo_demo(args) -> int:
    cfg = _merge_config(args, TOMO_DEFAULTS)
    n = int(cfg["n"])
    shots = cfg["shots"]
    if shots != qsim.ANALYTIC:
        shots = int(shots)
    rng = np.random.default_rng(int(cfg["seed"]))
    layer = random_layer(n, n, rng)
    x = rng.normal(size=n)
    x /= np.linalg.norm(x)
    truth = matrix_from_angles(layer) @ x
    noise = qsim.NoiseModel(float(cfg["noise_p"]))
    tcfg = qsim.TomographyConfig(shots=shots, seed=int(cfg["seed"]), delta=cfg["delta"])

    pairwise = qsim.tomography_pairwise(layer, x, tcfg, noise)
    pair_err = min(
        float(np.max(np.abs(pairwise - truth))),
        float(np.max(np.abs(pairwise + truth))),
    )
    ancilla = qsim.tomography_ancilla(layer, x, tcfg, noise)
    anc_err = float(np.max(np.abs(ancilla - truth)))
    print(f"pairwise_linf={pair_err:.6f}")
    print(f"ancilla_linf={anc_err:.6f}")

    if tcfg.analytic:
        print("discard_fraction=0.0")
    else:
        state = qsim.pyramid_output_state(layer, x)
        counts = qsim.sample_shots(state, tcfg, noise)
        kept, frac = qsim.mitigate_unary(counts)
        print(f"discard_fraction={frac:.6f}")
        if noise.bitflip_p > 0.0:
            total = sum(counts.values())
            raw = np.array(
                [counts.get(format(1 << i, f"0{n}b"), 0) / total for i in range(n)]
            )
            kept_total = sum(kept.values())
            fixed = np.array(
                [kept.get(format(1 << i, f"0{n}b"), 0) / kept_total for i in range(n)]
            )
            ideal = np.abs(truth)
            print(f"unmitigated_linf={np.max(np.abs(np.sqrt(raw) - ideal)):.6f}")
            print(f"mitigated_linf={np.max(np.abs(np.sqrt(fixed) - ideal)):.6f}")
    return EXIT_OK


BENCH_DEFAULTS = {
    "sizes": "64,128,256,512",
    "reps": 5,
    "warmup": 1,
    "lr": 0.01,
    "seed": 0,
    "svb_epsilon": 0.05,
    "out": "bench.csv",
}


def _pyramid_step_timer(n: int, rng) -> "callable":
    layer = random_layer(n, n, rng)
    x = rng.normal(size=n)
    target = rng.normal(size=n)

    def step() -> None:
        y, trace = forward(layer, x, keep_trace=True)
        _, delta = loss_and_delta(y, target, "mse")
        grads, _ = layer_backward(layer, trace, delta)
        layer.angles = canonical_angles(layer.angles - 0.01 * grads)

    return step


def _svb_step_timer(n: int, rng, epsilon: float) -> "callable":
    w, _ = qr(rng.normal(size=(n, n)))
    x = rng.normal(size=n)
    target = rng.normal(size=n)
    state = {"w": w}

    def step() -> None:
        w = state["w"]
        y = w @ x
        _, delta = loss_and_delta(y, target, "mse")
        g = np.outer(delta, x)
        state["w"] = svb_update(w, g, 0.01, SVBConfig(epsilon))

    return step


def _median_ms(step, reps: int, warmup: int) -> float:
    for _ in range(warmup):
        step()
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        step()
        times.append((time.perf_counter() - t0) * 1e3)
    return float(np.median(times))


def cmd_bench_scaling(args) -> int:
    cfg = _merge_config(args, BENCH_DEFAULTS)
    sizes = _parse_int_list(cfg["sizes"], "sizes")
    if any(n < 2 for n in sizes):
        raise ConfigError(f"sizes must be >= 2: {sizes}")
    rng = np.random.default_rng(int(cfg["seed"]))
    rows = []
    for n in sizes:
        pyr_ms = _median_ms(_pyramid_step_timer(n, rng), int(cfg["reps"]), int(cfg["warmup"]))
        svb_ms = _median_ms(
            _svb_step_timer(n, rng, float(cfg["svb_epsilon"])),
            int(cfg["reps"]), int(cfg["warmup"]),
        )
        rows.append((n, pyr_ms, svb_ms))
        print(f"n={n} pyramid_ms={pyr_ms:.3f} svb_ms={svb_ms:.3f} ratio={svb_ms / pyr_ms:.2f}")
    with open(cfg["out"], "w") as fh:
        fh.write("n,pyramid_ms,svb_ms\n")
        for n, p, s in rows:
            fh.write(f"{n},{p:.6f},{s:.6f}\n")
    first = rows[0][2] / rows[0][1]
    last = rows[-1][2] / rows[-1][1]
    print(f"ratio_trend={last / first:.2f}x from n={rows[0][0]} to n={rows[-1][0]}")
    return EXIT_OK


EXPORT_DEFAULTS = {
    "n": 8,
    "seed": 0,
    "zero_angles": False,
    "out": "matrix.csv",
    "from_csv": None,
}


def cmd_export_matrix(args) -> int:
    cfg = _merge_config(args, EXPORT_DEFAULTS)
    if cfg["from_csv"]:
        try:
            mat = np.loadtxt(cfg["from_csv"], delimiter=",", ndmin=2)
        except OSError as exc:
            raise DataError(f"cannot read {cfg['from_csv']}: {exc}") from exc
        layer, mask = angles_from_matrix(mat)
        rebuilt = matrix_from_angles(layer)
        for k in mask:
            rebuilt[:, k] *= -1.0
        residual = float(np.max(np.abs(rebuilt - mat)))
        print(f"sign_mask={list(mask)}")
        print(f"roundtrip_residual={residual:.3e}")
        return EXIT_OK
    n = int(cfg["n"])
    if cfg["zero_angles"]:
        layer = random_layer(n, n, 0)
        layer.angles = np.zeros_like(layer.angles)
    else:
        layer = random_layer(n, n, int(cfg["seed"]))
    mat = matrix_from_angles(layer)
    export_matrix(mat, cfg["out"])
    relayer, mask = angles_from_matrix(mat)
    residual = float(np.max(np.abs(matrix_from_angles(relayer) - mat)))
    print(f"matrix_csv={cfg['out']}")
    print(f"sign_mask={list(mask)}")
    print(f"roundtrip_residual={residual:.3e}")
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat JSON file with default flag values")
    p.add_argument("--seed", type=int, help="RNG seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pyramidnet",
        description="Orthogonal layers as rotation pyramids: training, "
        "simulator checks, tomography demos, benchmarks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a pyramid net or a dense baseline")
    _add_common(p)
    p.add_argument("--arch", help="comma-separated layer sizes, e.g. 4,2")
    p.add_argument("--data", choices=["synthetic", "mnist"])
    p.add_argument("--data-dir", dest="data_dir",
                   help=f"MNIST directory (default ${data_mod.DATA_DIR_ENV} or ./data)")
    p.add_argument("--classes", help="MNIST labels to keep, e.g. 6,9")
    p.add_argument("--pca", type=int, help="PCA width (must equal arch input)")
    p.add_argument("--lr", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--updater", choices=["pyramid", "plain", "svb", "stiefel"])
    p.add_argument("--svb-epsilon", dest="svb_epsilon", type=float)
    p.add_argument("--train-n", dest="train_n", type=int)
    p.add_argument("--test-n", dest="test_n", type=int)
    p.add_argument("--blobs-per-class", dest="blobs_per_class", type=int)
    p.add_argument("--separation", type=float)
    p.add_argument("--out")
    p.add_argument("--eval-per-minibatch", dest="eval_per_minibatch",
                   action="store_const", const=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("qsim-verify", help="simulator equivalence and loader checks")
    _add_common(p)
    p.add_argument("--min-n", dest="min_n", type=int)
    p.add_argument("--max-n", dest="max_n", type=int)
    p.add_argument("--loader-trials", dest="loader_trials", type=int)
    p.add_argument("--inject-fault", dest="inject_fault", action="store_const",
                   const=True, help="test hook: force one equivalence failure")
    p.set_defaults(func=cmd_qsim_verify)

    p = sub.add_parser("tomo-demo", help="run both sign-recovery procedures")
    _add_common(p)
    p.add_argument("--n", type=int)
    p.add_argument("--shots", help="shot count or 'analytic'")
    p.add_argument("--noise-p", dest="noise_p", type=float)
    p.add_argument("--delta", type=float)
    p.set_defaults(func=cmd_tomo_demo)

    p = sub.add_parser("bench-scaling", help="per-step time, pyramid vs SVB")
    _add_common(p)
    p.add_argument("--sizes", help="comma-separated sizes, e.g. 64,128,256,512")
    p.add_argument("--reps", type=int)
    p.add_argument("--warmup", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench_scaling)

    p = sub.add_parser("export-matrix", help="write a layer matrix as CSV")
    _add_common(p)
    p.add_argument("--n", type=int)
    p.add_argument("--zero-angles", dest="zero_angles", action="store_const", const=True)
    p.add_argument("--out")
    p.add_argument("--from-csv", dest="from_csv",
                   help="import a matrix instead and report angles roundtrip")
    p.set_defaults(func=cmd_export_matrix)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except CheckError as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
