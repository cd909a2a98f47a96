"""Dense float64 linear algebra kernels for matrices up to n ~ 1024.

Vectors are 1-D float64 numpy arrays, matrices 2-D row-major float64.
The factorizations are small, deterministic implementations: modified
Gram-Schmidt QR, one-sided Jacobi SVD and a cyclic Jacobi eigensolver,
all with fixed sweep orders so repeated runs on the same platform are
bit-identical.
"""

from __future__ import annotations

import numpy as np

JACOBI_TOL = 1e-12
QR_PIVOT_TOL = 1e-12
DEFAULT_MAX_SWEEPS = 60


class ConvergenceError(RuntimeError):
    """A Jacobi iteration exceeded its sweep cap."""

    def __init__(self, what: str, sweeps: int):
        super().__init__(f"{what} did not converge within {sweeps} sweeps")
        self.sweeps = sweeps


class RankDeficientError(ValueError):
    """A QR pivot fell below tolerance."""


def as_vector(x) -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValueError(f"expected a non-empty 1-D vector, got shape {v.shape}")
    return v


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2 or m.size == 0:
        raise ValueError(f"expected a non-empty 2-D matrix, got shape {m.shape}")
    return m


def _require_square_finite(a: np.ndarray, what: str) -> np.ndarray:
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"{what} requires a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{what} requires finite entries")
    return a


def matmul(a, b) -> np.ndarray:
    """Dense product a @ b with an explicit shape check."""
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def qr(a) -> tuple[np.ndarray, np.ndarray]:
    """Modified Gram-Schmidt QR of a square full-rank matrix.

    Returns (q, r) with q orthogonal, r upper triangular with a
    positive diagonal and q @ r == a. The projection pass runs twice,
    which keeps q orthogonal to well below 1e-10 for any full-rank
    input at these sizes.
    """
    a = _require_square_finite(as_matrix(a), "qr")
    n = a.shape[0]
    q = np.zeros_like(a)
    r = np.zeros((n, n))
    for k in range(n):
        v = a[:, k].copy()
        for _ in range(2):
            for j in range(k):
                p = q[:, j] @ v
                r[j, k] += p
                v -= p * q[:, j]
        norm = float(np.linalg.norm(v))
        if norm < QR_PIVOT_TOL:
            raise RankDeficientError(
                f"pivot {norm:.3e} below {QR_PIVOT_TOL:.0e} at column {k}"
            )
        r[k, k] = norm
        q[:, k] = v / norm
    return q, r


def svd(a, max_sweeps: int = DEFAULT_MAX_SWEEPS) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One-sided Jacobi SVD of a square matrix.

    Returns (u, s, v) with a == u @ diag(s) @ v.T, singular values
    non-negative in descending order, and u, v orthogonal. Column
    pairs are rotated in a fixed cyclic order until every normalized
    off-diagonal dot product drops below 1e-12.
    """
    a = _require_square_finite(as_matrix(a), "svd")
    n = a.shape[0]
    u = a.copy()
    v = np.eye(n)
    for _ in range(max_sweeps):
        rotated = False
        for i in range(n - 1):
            for j in range(i + 1, n):
                ci = u[:, i]
                cj = u[:, j]
                aii = ci @ ci
                ajj = cj @ cj
                aij = ci @ cj
                denom = np.sqrt(aii * ajj)
                if denom == 0.0 or abs(aij) <= JACOBI_TOL * denom:
                    continue
                rotated = True
                tau = (ajj - aii) / (2.0 * aij)
                t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                gi = c * ci - s * cj
                gj = s * ci + c * cj
                u[:, i] = gi
                u[:, j] = gj
                vi = c * v[:, i] - s * v[:, j]
                vj = s * v[:, i] + c * v[:, j]
                v[:, i] = vi
                v[:, j] = vj
        if not rotated:
            break
    else:
        raise ConvergenceError("svd", max_sweeps)

    s = np.linalg.norm(u, axis=0)
    order = np.argsort(-s, kind="stable")
    s = s[order]
    u = u[:, order]
    v = v[:, order]
    for k in range(n):
        if s[k] > 0.0:
            u[:, k] /= s[k]
    for k in range(n):
        if s[k] == 0.0:
            u[:, k] = _complete_orthonormal(u, skip=k)
    return u, s, v


def _complete_orthonormal(u: np.ndarray, skip: int) -> np.ndarray:
    """Deterministic unit vector orthogonal to every column of u except `skip`."""
    n = u.shape[0]
    best = None
    best_norm = -1.0
    for cand in range(n):
        t = np.zeros(n)
        t[cand] = 1.0
        for m in range(n):
            if m == skip:
                continue
            t -= (u[:, m] @ t) * u[:, m]
        nt = float(np.linalg.norm(t))
        if nt > best_norm:
            best, best_norm = t, nt
    return best / best_norm


def eigh(a, max_sweeps: int = DEFAULT_MAX_SWEEPS) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Returns (vals, vecs) with vals descending and vecs orthogonal
    (eigenvectors in columns). The input must be symmetric within
    1e-10.
    """
    a = _require_square_finite(as_matrix(a), "eigh")
    n = a.shape[0]
    asym = float(np.max(np.abs(a - a.T))) if n > 1 else 0.0
    if asym > 1e-10:
        raise ValueError(f"eigh requires a symmetric matrix, asymmetry {asym:.3e}")
    m = (a + a.T) / 2.0
    v = np.eye(n)
    scale = max(1.0, float(np.max(np.abs(np.diag(m)))))
    for _ in range(max_sweeps):
        rotated = False
        for i in range(n - 1):
            for j in range(i + 1, n):
                if abs(m[i, j]) <= JACOBI_TOL * scale:
                    continue
                rotated = True
                tau = (m[j, j] - m[i, i]) / (2.0 * m[i, j])
                t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                ri = c * m[i, :] - s * m[j, :]
                rj = s * m[i, :] + c * m[j, :]
                m[i, :] = ri
                m[j, :] = rj
                ci = c * m[:, i] - s * m[:, j]
                cj = s * m[:, i] + c * m[:, j]
                m[:, i] = ci
                m[:, j] = cj
                vi = c * v[:, i] - s * v[:, j]
                vj = s * v[:, i] + c * v[:, j]
                v[:, i] = vi
                v[:, j] = vj
        if not rotated:
            break
    else:
        raise ConvergenceError("eigh", max_sweeps)
    vals = np.diag(m).copy()
    order = np.argsort(-vals, kind="stable")
    return vals[order], v[:, order]
