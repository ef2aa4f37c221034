import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qmpo.errors import ContractError, DimensionError
from qmpo.linalg import SymmetricOperator
from qmpo.rtr import (ReducedProblem, RtrConfig, euclidean_grad, global_necessary_check,
                      hess_action, project_tangent, recover_multiplier, reduced_objective,
                      retract, rtr_solve, tcg_step)
from qmpo.verification import balanced_svd_oracle, trs_secular_oracle

from conftest import random_stiefel, random_sym


def _riemannian_grad(prob, P):
    return project_tangent(P, euclidean_grad(prob, P))


def test_gradient_matches_finite_differences(rng):
    prob = ReducedProblem(random_sym(rng, 12), rng.standard_normal((12, 3)))
    P = random_stiefel(rng, 12, 3)
    xi = project_tangent(P, rng.standard_normal((12, 3)))
    g = _riemannian_grad(prob, P)
    h = 1e-6
    fd = (reduced_objective(prob, retract(P, h * xi))
          - reduced_objective(prob, retract(P, -h * xi))) / (2 * h)
    assert fd == pytest.approx(np.vdot(g, xi), rel=1e-6, abs=1e-8)


def test_hessian_is_symmetric_and_tangent(rng):
    prob = ReducedProblem(random_sym(rng, 10), rng.standard_normal((10, 2)))
    P = random_stiefel(rng, 10, 2)
    a = project_tangent(P, rng.standard_normal((10, 2)))
    b = project_tangent(P, rng.standard_normal((10, 2)))
    Ha, Hb = hess_action(prob, P, a), hess_action(prob, P, b)
    assert np.vdot(Ha, b) == pytest.approx(np.vdot(a, Hb), rel=1e-10, abs=1e-12)
    assert np.linalg.norm(P.T @ Ha + Ha.T @ P) < 1e-12
    with pytest.raises(ContractError):
        hess_action(prob, P, P)


def test_hessian_matches_gradient_differences_at_critical_point(rng):
    # at a critical point the Riemannian Hessian is the derivative of the projected gradient
    prob = ReducedProblem(random_sym(rng, 9), rng.standard_normal((9, 2)))
    P = rtr_solve(prob).P
    xi = project_tangent(P, rng.standard_normal((9, 2)))
    h = 1e-6
    d = (_riemannian_grad(prob, retract(P, h * xi)) - _riemannian_grad(prob, retract(P, -h * xi))) / (2 * h)
    np.testing.assert_allclose(project_tangent(P, d), hess_action(prob, P, xi), atol=1e-6)


def test_retraction_stays_on_manifold(rng):
    P = random_stiefel(rng, 8, 3)
    xi = project_tangent(P, rng.standard_normal((8, 3)))
    Q = retract(P, xi)
    np.testing.assert_allclose(Q.T @ Q, np.eye(3), atol=1e-14)
    np.testing.assert_allclose(retract(P, 0 * xi), P, atol=1e-14)


def test_tcg_respects_radius_and_decreases_model(rng):
    prob = ReducedProblem(random_sym(rng, 15), rng.standard_normal((15, 2)))
    P = random_stiefel(rng, 15, 2)
    g = _riemannian_grad(prob, P)
    for radius in (1e-3, 0.1, 10.0):
        eta = tcg_step(prob, P, g, radius)
        assert np.linalg.norm(eta) <= radius * (1 + 1e-10)
        model = np.vdot(g, eta) + 0.5 * np.vdot(eta, hess_action(prob, P, eta))
        assert model < 0


def test_trust_region_subproblem_matches_secular_oracle(rng):
    for _ in range(5):
        T = random_sym(rng, 25)
        g = rng.standard_normal(25)
        x, lam = trs_secular_oracle(T, g)
        f_star = x @ T @ x + 2 * x @ g
        res = rtr_solve(ReducedProblem(T, g), cfg=RtrConfig(restarts=3))
        assert res.objective == pytest.approx(f_star, abs=1e-9)
        assert res.converged


def test_square_case_matches_svd_closed_form(rng):
    T = random_sym(rng, 4)
    Gr = rng.standard_normal((4, 4))
    P_star, f_star = balanced_svd_oracle(Gr, T)
    res = rtr_solve(ReducedProblem(T, Gr))
    assert res.objective == pytest.approx(f_star, abs=1e-8)
    assert reduced_objective(ReducedProblem(T, Gr), P_star) == pytest.approx(f_star, abs=1e-12)


def test_zero_linear_term_gives_bottom_eigenvectors(rng):
    T = np.diag([3.0, -1.0, 2.0, 0.5, -4.0])
    res = rtr_solve(ReducedProblem(T, np.zeros((5, 2))))
    assert res.objective == pytest.approx(-5.0)
    assert set(np.flatnonzero(np.abs(res.P).sum(axis=1) > 0.5)) == {1, 4}


def test_multiplier_and_global_condition(rng):
    prob = ReducedProblem(random_sym(rng, 20), rng.standard_normal((20, 3)))
    res = rtr_solve(prob, cfg=RtrConfig(restarts=4))
    P, Lam = res.P, res.Lambda
    np.testing.assert_allclose(Lam, recover_multiplier(prob, P))
    assert np.linalg.norm(prob.T @ P + P @ Lam + prob.Gr) < 1e-8
    assert global_necessary_check(prob, P) >= -1e-8


def test_operator_input_and_monotone_history(rng):
    op = SymmetricOperator.dense(random_sym(rng, 30))
    res = rtr_solve(ReducedProblem(op, rng.standard_normal((30, 4))))
    assert np.all(np.diff(res.f_history) <= 1e-12 * (1 + np.abs(res.f_history[:-1])))


def test_bad_inputs(rng):
    with pytest.raises(DimensionError):
        ReducedProblem(np.eye(3), np.ones((4, 1)))
    with pytest.raises(ContractError):
        ReducedProblem(np.triu(np.ones((3, 3))), np.ones((3, 1)))
    prob = ReducedProblem(np.eye(3), np.ones((3, 1)))
    with pytest.raises(ContractError):
        rtr_solve(prob, P0=np.ones((3, 1)))
    with pytest.raises(DimensionError):
        rtr_solve(prob, P0=np.eye(3)[:, :2])
    with pytest.raises(ValueError):
        RtrConfig(rho_prime=0.5)


@settings(max_examples=25, deadline=None)
@given(m=st.integers(3, 12), l=st.integers(1, 3), seed=st.integers(0, 10**6))
def test_solution_is_stationary_and_feasible(m, l, seed):
    rng = np.random.default_rng(seed)
    prob = ReducedProblem(random_sym(rng, m), rng.standard_normal((m, l)))
    res = rtr_solve(prob)
    assert np.linalg.norm(res.P.T @ res.P - np.eye(l)) < 1e-12
    assert res.converged
    assert np.linalg.norm(_riemannian_grad(prob, res.P)) <= 1e-9
