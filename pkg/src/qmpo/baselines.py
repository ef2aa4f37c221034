"""Reference solvers: generalized power iteration and full-space RTR.

Both work on the problem normalized by ``||G||_F`` and return the same
:class:`~qmpo.driver.SolveReport` as the block Lanczos driver.
"""

from dataclasses import dataclass
import logging
import math
import time

import numpy as np

from .driver import Checkpoint, SolveReport, SolverConfig, direct_kkt, normalize, solve
from .errors import DimensionError, SingularMatrixError
from .linalg import apply_sym, polar, sym, thin_qr
from .rtr import ReducedProblem, RtrConfig, random_stiefel, rtr_solve

log = logging.getLogger(__name__)


@dataclass
class BaselineConfig:
    max_iter: int = 5000
    tol: float = 1e-10
    alpha: str = "row_sum"
    seed: int = 0

    def __post_init__(self):
        if self.max_iter <= 0 or self.tol <= 0:
            raise ValueError("max_iter and tol must be positive")
        if self.alpha not in ("row_sum",):
            raise ValueError(f"unknown shift strategy {self.alpha!r}")


def _multiplier(U, HU, G):
    return sym(-(U.T @ (HU + G)))


def gpi_solve(problem, cfg=None):
    """Generalized power iteration ``U <- polar((alpha I - H) U - G)``.

    ``alpha`` bounds ``lambda_max(H)`` from above (absolute row sums), so
    ``alpha I - H`` is positive semidefinite and every step decreases the
    objective.  Stops when the relative objective change drops below
    ``cfg.tol`` or after ``cfg.max_iter`` iterations.
    """
    cfg = cfg or BaselineConfig()
    t0 = time.perf_counter()
    scaled, s = normalize(problem)
    H, G = scaled.H, scaled.G
    n, l = G.shape
    rng = np.random.default_rng(cfg.seed)
    alpha = H.abs_row_sum_bound() + 1e-8

    Q, _, rank = thin_qr(-G)
    U = Q if rank == l else random_stiefel(n, l, rng)
    HU = apply_sym(H, U)
    f = float(np.vdot(U, HU) + 2.0 * np.vdot(U, G))
    history = []
    termination = "k_max"
    it = 0
    for it in range(1, cfg.max_iter + 1):
        Y = alpha * U - HU - G
        try:
            U_new = polar(Y)[0]
        except SingularMatrixError:
            log.warning("GPI: singular polar input at iteration %d, perturbing", it)
            U_new = polar(Y + 1e-8 * (1.0 + np.linalg.norm(Y)) * rng.standard_normal(Y.shape))[0]
        HU_new = apply_sym(H, U_new)
        f_new = float(np.vdot(U_new, HU_new) + 2.0 * np.vdot(U_new, G))
        du = float(np.linalg.norm(U_new - U)) / math.sqrt(n)
        U, HU, f_old, f = U_new, HU_new, f, f_new
        kkt = float(np.linalg.norm(HU + U @ _multiplier(U, HU, G) + G))
        history.append(Checkpoint(it, f, kkt, du, 1e3 * (time.perf_counter() - t0)))
        if abs(f_old - f) / (abs(f_old) + 1.0) <= cfg.tol:
            termination = "objective_converged"
            break

    Lam = _multiplier(U, HU, G)
    return SolveReport(
        U=U, Lambda=Lam, objective=f, kkt_residual=direct_kkt(scaled, U, Lam),
        history=history, termination=termination, scale=s, solver="gpi", steps=it,
        basis_dim=n, wall_ms=1e3 * (time.perf_counter() - t0))


def _rtr_report(scaled, s, res, solver, t0):
    U, Lam = res.P, res.Lambda
    kkt = direct_kkt(scaled, U, Lam)
    hist = [Checkpoint(i, f, float("nan") if i < len(res.f_history) - 1 else kkt, None, 0.0)
            for i, f in enumerate(res.f_history)]
    return SolveReport(
        U=U, Lambda=Lam, objective=res.objective, kkt_residual=kkt, history=hist,
        termination="grad_converged" if res.converged else "k_max", scale=s,
        solver=solver, steps=res.iterations, basis_dim=scaled.n,
        wall_ms=1e3 * (time.perf_counter() - t0))


def rtr_full_solve(problem, cfg=None, seed=0):
    """Riemannian trust region on the full ``n x l`` problem (matrix-free)."""
    cfg = cfg or RtrConfig()
    t0 = time.perf_counter()
    scaled, s = normalize(problem)
    res = rtr_solve(ReducedProblem(scaled.H, scaled.G), None, cfg, seed=seed)
    return _rtr_report(scaled, s, res, "rtr", t0)


def dense_rtr_oracle(problem, restarts=5, warm_start=None, seed=0, max_n=500):
    """Best of full-space RTR runs on the densified problem.

    Starts from the block Lanczos solution (computed here unless
    ``warm_start`` is given, in the normalized scaling) and from ``restarts``
    random feasible points.  Guarded to ``n <= max_n``.
    """
    t0 = time.perf_counter()
    if problem.n > max_n:
        raise DimensionError(f"dense oracle limited to n <= {max_n}, got n={problem.n}")
    if not np.any(problem.G):
        # pure eigenvalue problem, solved directly by rtr_solve
        scaled, s = problem, 1.0
    else:
        scaled, s = normalize(problem)
    if warm_start is None and np.any(scaled.G):
        if scaled.n > scaled.l:
            warm_start = solve(problem, SolverConfig(
                eps_f=1e-14, eps_u=1e-12, eps_g=1e-11, rtr=RtrConfig(restarts=restarts),
                seed=seed)).U
        else:
            warm_start = polar(-scaled.G)[0]
    prob = ReducedProblem(scaled.H.to_dense(), scaled.G)
    res = rtr_solve(prob, warm_start, RtrConfig(restarts=restarts + 1), seed=seed)
    return _rtr_report(scaled, s, res, "dense_rtr", t0)
