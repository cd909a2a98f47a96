"""Orthogonality-preserving weight updaters used as training baselines.

Both operate on explicit square weight matrices: singular value
bounding re-orthogonalizes after a plain gradient step by clamping
singular values toward 1, and the manifold update projects the
gradient onto the tangent space of the orthogonal group before
retracting with a QR factorization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import as_matrix, matmul, qr, svd


@dataclass
class SVBConfig:
    """Half-width of the allowed singular-value band around 1."""

    epsilon: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.epsilon) or self.epsilon < 0:
            raise ValueError(f"epsilon must be finite and >= 0, got {self.epsilon}")


def svb_update(w, g, lr: float, cfg: SVBConfig | None = None) -> np.ndarray:
    """Gradient step followed by singular-value clamping.

    With epsilon = 0 every singular value is set to exactly 1, i.e.
    the result is fully orthogonalized; otherwise values are clamped
    into [1/(1+eps), 1+eps].
    """
    cfg = cfg or SVBConfig()
    w = as_matrix(w)
    g = as_matrix(g)
    if w.shape != g.shape or w.shape[0] != w.shape[1]:
        raise ValueError(f"need matching square matrices, got {w.shape} and {g.shape}")
    stepped = w - lr * g
    u, s, v = svd(stepped)
    if cfg.epsilon == 0.0:
        s = np.ones_like(s)
    else:
        s = np.clip(s, 1.0 / (1.0 + cfg.epsilon), 1.0 + cfg.epsilon)
    return (u * s) @ v.T


def stiefel_tangent(w, g) -> np.ndarray:
    """Projection of g onto the tangent space at orthogonal w."""
    w = as_matrix(w)
    g = as_matrix(g)
    n = w.shape[0]
    eye = np.eye(n)
    return matmul(eye - matmul(w, w.T), g) + 0.5 * matmul(
        w, matmul(w.T, g) - matmul(g.T, w)
    )


def stiefel_update(w, g, lr: float) -> np.ndarray:
    """Tangent-space gradient step retracted back by QR.

    Requires w orthogonal within 1e-8. The positive-diagonal QR
    convention makes g = 0 an exact fixed point up to rounding.
    """
    w = as_matrix(w)
    g = as_matrix(g)
    if w.shape != g.shape or w.shape[0] != w.shape[1]:
        raise ValueError(f"need matching square matrices, got {w.shape} and {g.shape}")
    dev = float(np.max(np.abs(w.T @ w - np.eye(w.shape[0]))))
    if dev > 1e-8:
        raise ValueError(f"w is not orthogonal (deviation {dev:.3e})")
    omega = stiefel_tangent(w, g)
    q, _ = qr(w - lr * omega)
    return q
