"""Accuracy-vs-epoch figures with a per-epoch variance band.

Input files follow the trainer's metrics CSV schema (epoch, minibatch,
train_loss, test_accuracy, wall_ms), one row per minibatch. The line
is the per-epoch mean of the test-accuracy samples and the shaded band
is plus/minus one standard deviation of the samples inside each epoch,
which collapses to zero height when accuracy is recorded once per
epoch. Rendering is read-only and byte-stable for fixed inputs and
tool versions.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "pyramid-plots"

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

REQUIRED_COLUMNS = ("epoch", "minibatch", "train_loss", "test_accuracy", "wall_ms")


class SchemaError(ValueError):
    """A metrics CSV is missing required columns."""


@dataclass
class CurveSpec:
    csv_paths: list
    labels: list
    output_path: str
    title: str = "Test accuracy"

    def __post_init__(self):
        if not self.csv_paths:
            raise ValueError("need at least one CSV path")
        if len(self.csv_paths) != len(self.labels):
            raise ValueError(
                f"{len(self.csv_paths)} CSVs but {len(self.labels)} labels"
            )


def read_metrics(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in REQUIRED_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise SchemaError(f"{path}: missing column: {', '.join(missing)}")
        return [
            {
                "epoch": int(row["epoch"]),
                "minibatch": int(row["minibatch"]),
                "train_loss": float(row["train_loss"]),
                "test_accuracy": float(row["test_accuracy"]),
                "wall_ms": float(row["wall_ms"]),
            }
            for row in reader
        ]


def epoch_series(rows: list[dict]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-epoch (epochs, mean accuracy, std of the epoch's samples)."""
    if not rows:
        raise ValueError("metrics CSV has no data rows")
    epochs = sorted({r["epoch"] for r in rows})
    means, stds = [], []
    for e in epochs:
        samples = np.array([r["test_accuracy"] for r in rows if r["epoch"] == e])
        means.append(float(samples.mean()))
        stds.append(float(samples.std()))
    return np.array(epochs), np.array(means), np.array(stds)


def render_curves(spec: CurveSpec) -> list[str]:
    """Write the figure as PNG and SVG; returns the written paths."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for path, label in zip(spec.csv_paths, spec.labels):
        epochs, mean, std = epoch_series(read_metrics(path))
        ax.plot(epochs, mean, label=label, linewidth=1.8)
        ax.fill_between(epochs, mean - std, mean + std, alpha=0.25, linewidth=0)
    ax.set_xlabel("epoch")
    ax.set_ylabel("test accuracy")
    ax.set_title(spec.title)
    all_epochs = sorted(
        {e for path in spec.csv_paths for e in epoch_series(read_metrics(path))[0]}
    )
    ax.set_xticks(all_epochs if len(all_epochs) <= 20 else all_epochs[:: len(all_epochs) // 20 + 1])
    ax.legend()
    fig.tight_layout()

    out = Path(spec.output_path)
    written = []
    for suffix in (".png", ".svg"):
        target = out if out.suffix == suffix else out.with_suffix(suffix)
        fig.savefig(target, metadata=_stable_metadata(suffix))
        written.append(str(target))
    plt.close(fig)
    return written


def _stable_metadata(suffix: str) -> dict:
    if suffix == ".svg":
        return {"Date": None}
    return {"Software": "pyramid-plots"}
