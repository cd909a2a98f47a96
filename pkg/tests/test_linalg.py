import numpy as np
import pytest

from pyramidnet.linalg import (
    ConvergenceError,
    RankDeficientError,
    eigh,
    matmul,
    qr,
    svd,
)


def triple_loop_matmul(a, b):
    n, k = a.shape
    _, m = b.shape
    out = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for p in range(k):
                acc += a[i, p] * b[p, j]
            out[i, j] = acc
    return out


def test_matmul_identity():
    a = np.arange(9, dtype=float).reshape(3, 3)
    assert np.array_equal(matmul(np.eye(3), a), a)


def test_matmul_zeros():
    b = np.ones((3, 2))
    assert np.array_equal(matmul(np.zeros((2, 3)), b), np.zeros((2, 2)))


def test_matmul_matches_triple_loop():
    rng = np.random.default_rng(7)
    a = rng.normal(size=(4, 4))
    b = rng.normal(size=(4, 4))
    assert np.max(np.abs(matmul(a, b) - triple_loop_matmul(a, b))) <= 1e-12


def test_matmul_dimension_mismatch():
    with pytest.raises(ValueError, match="multiply"):
        matmul(np.ones((2, 3)), np.ones((2, 3)))


def test_matmul_associative_on_well_scaled_triples():
    rng = np.random.default_rng(11)
    for _ in range(20):
        a, b, c = (rng.uniform(-1, 1, size=(6, 6)) for _ in range(3))
        lhs = matmul(matmul(a, b), c)
        rhs = matmul(a, matmul(b, c))
        assert np.max(np.abs(lhs - rhs)) <= 1e-10


def test_qr_identity():
    q, r = qr(np.eye(4))
    assert np.allclose(q, np.eye(4), atol=1e-14)
    assert np.allclose(r, np.eye(4), atol=1e-14)


def test_qr_diagonal():
    q, r = qr(np.diag([2.0, 3.0]))
    assert np.allclose(q, np.eye(2), atol=1e-14)
    assert np.allclose(r, np.diag([2.0, 3.0]), atol=1e-14)


def test_qr_reconstruction_well_conditioned():
    rng = np.random.default_rng(5)
    a = rng.normal(size=(5, 5)) + 3 * np.eye(5)
    q, r = qr(a)
    assert np.max(np.abs(q @ r - a)) <= 1e-9
    assert np.max(np.abs(q.T @ q - np.eye(5))) <= 1e-10
    assert np.all(np.diag(r) > 0)
    assert np.max(np.abs(np.tril(r, -1))) == 0.0


def test_qr_rank_deficient():
    a = np.ones((3, 3))
    with pytest.raises(RankDeficientError):
        qr(a)


def test_svd_identity():
    _, s, _ = svd(np.eye(3))
    assert np.allclose(s, np.ones(3), atol=1e-14)


def test_svd_diagonal():
    _, s, _ = svd(np.diag([3.0, 2.0]))
    assert np.allclose(s, [3.0, 2.0], atol=1e-14)


def test_svd_reconstruction():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(6, 6))
    u, s, v = svd(a)
    assert np.max(np.abs(u @ np.diag(s) @ v.T - a)) <= 1e-8
    assert np.max(np.abs(u.T @ u - np.eye(6))) <= 1e-8
    assert np.max(np.abs(v.T @ v - np.eye(6))) <= 1e-8
    assert np.all(s >= 0)
    assert np.all(np.diff(s) <= 1e-15)


def test_svd_nonconvergence_carries_sweep_count():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(8, 8))
    with pytest.raises(ConvergenceError) as err:
        svd(a, max_sweeps=1)
    assert err.value.sweeps == 1


def test_eigh_diagonal():
    vals, _ = eigh(np.diag([5.0, 1.0]))
    assert np.allclose(vals, [5.0, 1.0], atol=1e-14)


def test_eigh_symmetric_2x2():
    vals, vecs = eigh(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert np.allclose(vals, [1.0, -1.0], atol=1e-12)
    inv_sqrt2 = 1 / np.sqrt(2)
    for col, want in zip(vecs.T, ([inv_sqrt2, inv_sqrt2], [inv_sqrt2, -inv_sqrt2])):
        want = np.asarray(want)
        assert min(np.max(np.abs(col - want)), np.max(np.abs(col + want))) <= 1e-12


def test_eigh_residual():
    rng = np.random.default_rng(9)
    m = rng.normal(size=(5, 5))
    a = (m + m.T) / 2
    vals, vecs = eigh(a)
    for lam, v in zip(vals, vecs.T):
        assert np.max(np.abs(a @ v - lam * v)) <= 1e-8
    assert np.max(np.abs(vecs.T @ vecs - np.eye(5))) <= 1e-8


def test_eigh_rejects_asymmetric():
    with pytest.raises(ValueError, match="symmetric"):
        eigh(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_qr_svd_bounds_over_seeded_inputs():
    # 1000 seeded random matrices across n in 2..16
    rng = np.random.default_rng(42)
    for trial in range(1000):
        n = 2 + trial % 15
        a = rng.normal(size=(n, n)) + (2 + n) * np.eye(n) * rng.choice([1.0, -1.0])
        q, r = qr(a)
        assert np.max(np.abs(q.T @ q - np.eye(n))) <= 1e-10
        assert np.max(np.abs(q @ r - a)) <= 1e-9 * max(1.0, np.max(np.abs(a)))
        u, s, v = svd(a)
        assert np.max(np.abs(u @ np.diag(s) @ v.T - a)) <= 1e-8 * max(1.0, np.max(np.abs(a)))
        assert np.max(np.abs(u.T @ u - np.eye(n))) <= 1e-8
        assert np.max(np.abs(v.T @ v - np.eye(n))) <= 1e-8
