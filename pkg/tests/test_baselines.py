import numpy as np
import pytest

from qmpo.baselines import BaselineConfig, dense_rtr_oracle, gpi_solve, rtr_full_solve
from qmpo.driver import QmpoProblem, solve
from qmpo.errors import DimensionError
from qmpo.problems import gen_synthetic
from qmpo.verification import balanced_svd_oracle

from conftest import dense_problem, random_stiefel


def test_gpi_fixed_point_for_zero_quadratic(rng):
    U0 = random_stiefel(rng, 12, 3)
    rep = gpi_solve(QmpoProblem(np.zeros((12, 12)), -U0))
    np.testing.assert_allclose(rep.U, U0, atol=1e-12)
    # report is scaled by ||G||_F = sqrt(3)
    assert rep.unscaled_objective == pytest.approx(-6.0)


def test_gpi_square_instance_matches_svd(rng):
    p = dense_problem(rng, 5, 5)
    rep = gpi_solve(p, BaselineConfig(max_iter=20000, tol=1e-15))
    _, f_star = balanced_svd_oracle(p.G, p.H.to_dense())
    assert rep.unscaled_objective == pytest.approx(f_star, abs=1e-8)


def test_gpi_objective_monotone(rng):
    rep = gpi_solve(gen_synthetic(400, 4, 0.05, 2))
    fs = [c.f for c in rep.history]
    assert all(b <= a + 1e-13 * (1 + abs(a)) for a, b in zip(fs, fs[1:]))
    assert np.linalg.norm(rep.U.T @ rep.U - np.eye(4)) < 1e-8


def test_gpi_not_better_than_lanczos():
    p = gen_synthetic(1000, 5, 0.05, 11)
    assert gpi_solve(p).objective >= solve(p).objective - 1e-6


def test_gpi_rank_deficient_g(rng):
    g = rng.standard_normal((30, 1))
    p = QmpoProblem(np.diag(rng.standard_normal(30)), np.hstack([g, g]))
    rep = gpi_solve(p)
    assert np.linalg.norm(rep.U.T @ rep.U - np.eye(2)) < 1e-8


def test_dense_oracle_zero_g_gives_bottom_eigenvectors():
    d = np.array([4.0, -1.0, 3.0, 0.0, -2.0, 5.0])
    rep = dense_rtr_oracle(QmpoProblem(np.diag(d), np.zeros((6, 2))))
    assert rep.objective == pytest.approx(-3.0)
    assert sorted(np.flatnonzero(np.abs(rep.U).sum(axis=1) > 0.5)) == [1, 4]


def test_dense_oracle_not_worse_than_lanczos(rng):
    for _ in range(3):
        p = dense_problem(rng, 50, 2)
        f_l = solve(p).objective
        f_o = dense_rtr_oracle(p).objective
        assert f_o <= f_l + 1e-8 * (1 + abs(f_l))


def test_dense_oracle_size_guard():
    with pytest.raises(DimensionError):
        dense_rtr_oracle(gen_synthetic(600, 2, 0.01, 0))


def test_full_rtr_agrees(rng):
    p = gen_synthetic(300, 3, 0.05, 5)
    assert rtr_full_solve(p).objective == pytest.approx(solve(p).objective, abs=1e-8)


def test_config_validation():
    with pytest.raises(ValueError):
        BaselineConfig(max_iter=0)
    with pytest.raises(ValueError):
        BaselineConfig(alpha="spectral")
