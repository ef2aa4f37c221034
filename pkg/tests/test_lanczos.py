import numpy as np
import pytest
import scipy.sparse as sp

from qmpo.errors import ContractError, DegenerateProblemError, DimensionError
from qmpo.lanczos import (BasisExhaustedError, assemble_T, lanczos_extend, lanczos_init,
                          last_coupling, relation_residual, residual_block)
from qmpo.linalg import SymmetricOperator

from conftest import random_sym


def _run(H, G, steps):
    st = lanczos_init(H, G)
    for _ in range(steps):
        lanczos_extend(st, H)
    return st


def test_basis_orthonormal_and_relation(rng):
    H = SymmetricOperator.dense(random_sym(rng, 80))
    G = rng.standard_normal((80, 4))
    st = _run(H, G, 8)
    V = st.basis()
    assert V.shape == (80, 36)
    np.testing.assert_allclose(V.T @ V, np.eye(36), atol=1e-12)
    assert relation_residual(st, H) <= 1e-12 * np.linalg.norm(assemble_T(st))
    # T is the projection of H onto the closed part of the basis
    j = st.complete
    Vj = st.basis(j)
    np.testing.assert_allclose(assemble_T(st, j), Vj.T @ (H @ Vj), atol=1e-12)


def test_first_block_is_qr_of_G(rng):
    H = SymmetricOperator.dense(random_sym(rng, 20))
    G = rng.standard_normal((20, 3))
    st = lanczos_init(H, G)
    np.testing.assert_allclose(st.V[0] @ st.K, G, atol=1e-13)
    assert np.allclose(np.triu(st.K), st.K)


def test_krylov_span(rng):
    # range(V_k) = span{G, HG, ..., H^{k-1} G}
    Hd = random_sym(rng, 30)
    H = SymmetricOperator.dense(Hd)
    G = rng.standard_normal((30, 2))
    st = _run(H, G, 4)
    K = np.hstack([np.linalg.matrix_power(Hd, p) @ G for p in range(4)])
    V = st.basis(4)
    Kq = np.linalg.qr(K)[0]
    assert np.linalg.norm(Kq - V @ (V.T @ Kq)) < 1e-9


def test_termination_on_invariant_subspace(rng):
    # H acts on span(e_1..e_6) only; G lives there, so the basis stops at 6 columns
    D = np.zeros((50, 50))
    D[:6, :6] = random_sym(rng, 6)
    H = SymmetricOperator.dense(D)
    G = np.zeros((50, 2))
    G[:6] = rng.standard_normal((6, 2))
    st = lanczos_init(H, G)
    while not st.terminated:
        lanczos_extend(st, H)
    assert st.k == 3
    assert st.complete == 3
    assert residual_block(st, 3) is None and last_coupling(st, 3) is None
    assert relation_residual(st, H) < 1e-12
    with pytest.raises(ContractError):
        lanczos_extend(st, H)


def test_rank_deficient_start_deflates(rng):
    H = SymmetricOperator.dense(random_sym(rng, 40))
    g = rng.standard_normal(40)
    G = np.column_stack([g, 2 * g, rng.standard_normal(40)])
    st = _run(H, G, 5)
    V = st.basis()
    np.testing.assert_allclose(V.T @ V, np.eye(V.shape[1]), atol=1e-12)
    np.testing.assert_allclose(st.V[0] @ st.K, G, atol=1e-12)
    assert relation_residual(st, H) < 1e-11


def test_basis_exhaustion(rng):
    H = SymmetricOperator.dense(random_sym(rng, 7))
    G = rng.standard_normal((7, 3))
    st = _run(H, G, 1)
    with pytest.raises(BasisExhaustedError):
        lanczos_extend(st, H)
    assert st.k == 2 and st.pending_L is not None
    assert relation_residual(st, H, 2) < 1e-12


def test_sparse_operator(rng):
    B = sp.random(300, 300, density=0.02, random_state=np.random.default_rng(3))
    H = SymmetricOperator.sparse(B + B.T)
    st = _run(H, rng.standard_normal((300, 5)), 12)
    V = st.basis()
    assert np.linalg.norm(V.T @ V - np.eye(V.shape[1])) < 1e-10


def test_preconditions(rng):
    H = SymmetricOperator.dense(random_sym(rng, 5))
    with pytest.raises(DegenerateProblemError):
        lanczos_init(H, np.zeros((5, 2)))
    with pytest.raises(DimensionError):
        lanczos_init(H, np.ones((5, 5)))
    with pytest.raises(DimensionError):
        lanczos_init(H, np.ones((4, 1)))
    st = lanczos_init(H, np.ones((5, 1)))
    with pytest.raises(ContractError):
        residual_block(st, 1)
    with pytest.raises(DimensionError):
        assemble_T(st, 2)
