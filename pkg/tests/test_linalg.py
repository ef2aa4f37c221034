import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from qmpo.errors import AsymmetricMatrixError, DimensionError, SingularMatrixError
from qmpo.linalg import (SymmetricOperator, apply_sym, inv_sqrtm, norm2, polar, sym, sym_eig,
                         thin_qr)

from conftest import random_sym


def test_apply_sym_agrees_across_storage_forms(rng):
    A = rng.standard_normal((7, 12))
    H = A.T @ A
    X = rng.standard_normal((12, 3))
    ref = H @ X
    for op in (SymmetricOperator.dense(H), SymmetricOperator.sparse(sp.csr_matrix(H)),
               SymmetricOperator.gram(A), SymmetricOperator.gram(sp.csr_matrix(A))):
        assert op.n == 12
        np.testing.assert_allclose(apply_sym(op, X), ref, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(op @ X[:, 0], ref[:, 0], rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(op.to_dense(), H, atol=1e-12)


def test_scaled_operator_is_lazy(rng):
    H = random_sym(rng, 5)
    op = SymmetricOperator.dense(H)
    half = op.scaled(0.5)
    assert half.data is op.data
    X = rng.standard_normal((5, 2))
    np.testing.assert_allclose(half @ X, 0.5 * H @ X)
    assert half.abs_row_sum_bound() == pytest.approx(0.5 * op.abs_row_sum_bound())


def test_identity_operator(rng):
    X = rng.standard_normal((4, 2))
    np.testing.assert_array_equal(SymmetricOperator.identity(4) @ X, X)


def test_asymmetric_input_rejected():
    with pytest.raises(AsymmetricMatrixError):
        SymmetricOperator.dense([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(AsymmetricMatrixError):
        SymmetricOperator.sparse(sp.csr_matrix([[1.0, 2.0], [0.0, 1.0]]))


def test_dimension_mismatch():
    op = SymmetricOperator.identity(3)
    with pytest.raises(DimensionError):
        apply_sym(op, np.ones((4, 1)))
    with pytest.raises(DimensionError):
        SymmetricOperator.dense(np.ones((2, 3)))


def test_row_sum_bound_dominates_spectrum(rng):
    A = rng.standard_normal((6, 9))
    for op in (SymmetricOperator.dense(random_sym(rng, 9)), SymmetricOperator.gram(A)):
        lam = np.abs(np.linalg.eigvalsh(op.to_dense())).max()
        assert op.abs_row_sum_bound() >= lam - 1e-12


def test_thin_qr_positive_diagonal_and_rank(rng):
    A = rng.standard_normal((10, 4))
    Q, R, rank = thin_qr(A)
    assert rank == 4
    assert np.all(np.diag(R) >= 0)
    np.testing.assert_allclose(Q @ R, A, atol=1e-13)
    np.testing.assert_allclose(Q.T @ Q, np.eye(4), atol=1e-14)

    B = A.copy()
    B[:, 3] = B[:, 0] + 2 * B[:, 1]
    assert thin_qr(B).rank == 3
    assert thin_qr(np.zeros((5, 2))).rank == 0


def test_polar_known_case():
    Q, S = polar(np.diag([3.0, -2.0]))
    np.testing.assert_allclose(Q, np.diag([1.0, -1.0]), atol=1e-15)
    np.testing.assert_allclose(S, np.diag([3.0, 2.0]), atol=1e-14)


def test_polar_rank_deficient():
    with pytest.raises(SingularMatrixError):
        polar(np.array([[1.0, 1.0], [1.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(DimensionError):
        polar(np.ones((2, 3)))


@settings(max_examples=60, deadline=None)
@given(p=st.integers(1, 9), s=st.integers(1, 9), seed=st.integers(0, 2**32 - 1))
def test_polar_roundtrip_property(p, s, seed):
    if p < s:
        p, s = s, p
    Y = np.random.default_rng(seed).standard_normal((p, s))
    Q, S = polar(Y)
    np.testing.assert_allclose(Q @ S, Y, atol=1e-12 * (1 + np.abs(Y).max()))
    np.testing.assert_allclose(Q.T @ Q, np.eye(s), atol=1e-13)
    assert np.linalg.eigvalsh(S).min() > 0


def test_sym_eig_descending_and_reconstructs(rng):
    A = random_sym(rng, 6)
    w, V = sym_eig(A)
    assert np.all(np.diff(w) <= 0)
    np.testing.assert_allclose(V @ np.diag(w) @ V.T, A, atol=1e-13)
    with pytest.raises(AsymmetricMatrixError):
        sym_eig(np.triu(np.ones((3, 3))))


def test_small_helpers(rng):
    X = rng.standard_normal((3, 3))
    np.testing.assert_allclose(sym(X), sym(X).T)
    M = X @ X.T + np.eye(3)
    R = inv_sqrtm(M)
    np.testing.assert_allclose(R @ M @ R, np.eye(3), atol=1e-12)
    with pytest.raises(SingularMatrixError):
        inv_sqrtm(np.diag([1.0, 0.0]))
    assert norm2(np.diag([1.0, -4.0])) == pytest.approx(4.0)
    assert norm2(np.zeros((0, 0))) == 0.0
