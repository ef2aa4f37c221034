"""Riemannian trust-region solver for

    min  tr(P^T T P) + 2 tr(P^T Gr)   subject to   P^T P = I

on the Stiefel manifold with the embedded metric, a QR retraction and a
Steihaug-Toint truncated CG inner solver.  ``T`` may be a dense array or
anything supporting ``T @ X`` (e.g. :class:`qmpo.linalg.SymmetricOperator`),
so the same code serves the projected problems of the block Lanczos driver
and the full-space baseline.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import ContractError, DimensionError, SingularMatrixError
from .linalg import SymmetricOperator, polar, sym, sym_eig, thin_qr

_EPS = np.finfo(float).eps


@dataclass
class ReducedProblem:
    """Projected problem data: ``T`` (``m x m`` symmetric) and ``Gr`` (``m x l``)."""

    T: object
    Gr: np.ndarray

    def __post_init__(self):
        self.Gr = np.asarray(self.Gr, dtype=float)
        if self.Gr.ndim == 1:
            self.Gr = self.Gr[:, None]
        if isinstance(self.T, SymmetricOperator):
            m = self.T.n
        else:
            self.T = np.asarray(self.T, dtype=float)
            m = self.T.shape[0]
            if self.T.shape != (m, m):
                raise DimensionError(f"T must be square, got {self.T.shape}")
            if np.linalg.norm(self.T - self.T.T) > 1e-12 * max(np.linalg.norm(self.T), 1.0):
                raise ContractError("T is not symmetric")
        if self.Gr.shape[0] != m or self.Gr.shape[1] > m:
            raise DimensionError(f"Gr shape {self.Gr.shape} does not fit T of order {m}")

    @property
    def m(self):
        return self.Gr.shape[0]

    @property
    def l(self):
        return self.Gr.shape[1]


@dataclass
class RtrConfig:
    """Trust-region parameters; ``None`` entries take size-dependent defaults.

    ``grad_tol`` defaults to ``1e-10 * (1 + ||Gr||_F)``, ``initial_radius`` to
    ``0.1 sqrt(l)``, ``max_radius`` to ``sqrt(m l)`` and ``max_inner`` to the
    dimension of the tangent space.
    """

    max_iter: int = 1000
    grad_tol: float = None
    initial_radius: float = None
    max_radius: float = None
    rho_prime: float = 0.1
    max_inner: int = None
    theta: float = 1.0
    kappa: float = 0.1
    restarts: int = 1

    def __post_init__(self):
        if not 0 < self.rho_prime <= 0.25:
            raise ValueError("rho_prime must lie in (0, 1/4]")
        for name in ("max_iter", "theta", "kappa", "restarts"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("grad_tol", "initial_radius", "max_radius", "max_inner"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class RtrResult:
    P: np.ndarray
    Lambda: np.ndarray
    objective: float
    grad_norm: float
    iterations: int
    converged: bool
    f_history: list = field(default_factory=list, repr=False)


def _tp(prob, P):
    return np.asarray(prob.T @ P, dtype=float)


def _inner(A, B):
    return float(np.vdot(A, B))


def reduced_objective(prob, P, TP=None):
    """``tr(P^T T P) + 2 tr(P^T Gr)``."""
    TP = _tp(prob, P) if TP is None else TP
    return _inner(P, TP) + 2.0 * _inner(P, prob.Gr)


def euclidean_grad(prob, P, TP=None):
    """``2 (T P + Gr)``."""
    TP = _tp(prob, P) if TP is None else TP
    return 2.0 * (TP + prob.Gr)


def project_tangent(P, X):
    """Orthogonal projection ``X - P sym(P^T X)`` onto the tangent space at ``P``."""
    return X - P @ sym(P.T @ X)


def _hess(prob, P, xi, S):
    # S = sym(P^T egrad(P)), cached per iterate
    return project_tangent(P, 2.0 * _tp(prob, xi) - xi @ S)


def hess_action(prob, P, xi):
    """Riemannian Hessian of the objective at ``P`` applied to a tangent ``xi``."""
    xi = np.asarray(xi, dtype=float)
    if np.linalg.norm(sym(P.T @ xi)) > 1e-8 * (1.0 + np.linalg.norm(xi)):
        raise ContractError("hess_action needs a tangent vector at P")
    S = sym(P.T @ euclidean_grad(prob, P))
    return _hess(prob, P, xi, S)


def retract(P, xi):
    """QR retraction: Q factor (positive-diagonal convention) of ``P + xi``."""
    return thin_qr(P + xi).Q


def recover_multiplier(prob, P, TP=None):
    """Multiplier ``Lambda = -sym(P^T (T P + Gr))`` of the reduced KKT system."""
    TP = _tp(prob, P) if TP is None else TP
    return sym(-(P.T @ (TP + prob.Gr)))


def global_necessary_check(prob, P):
    """Smallest eigenvalue of ``sym(-P^T Gr)``; a global minimizer has it >= 0."""
    return float(sym_eig(sym(-(P.T @ prob.Gr))).values[-1])


def default_grad_tol(prob):
    return 1e-10 * (1.0 + np.linalg.norm(prob.Gr))


def _tcg(prob, P, grad, S, radius, cfg):
    """Truncated CG on the tangent space; returns (eta, H eta, reason, iters)."""
    eta = np.zeros_like(grad)
    Heta = np.zeros_like(grad)
    r = grad.copy()
    rr = _inner(r, r)
    r0 = math.sqrt(rr)
    if r0 == 0.0:
        return eta, Heta, "zero_gradient", 0
    if cfg.max_inner is not None:
        max_inner = cfg.max_inner
    else:
        max_inner = max(1, prob.m * prob.l - prob.l * (prob.l + 1) // 2)
    target = r0 * min(r0 ** cfg.theta, cfg.kappa)
    delta = -r
    e_Pe = 0.0
    reason = "max_inner"
    j = 0
    for j in range(1, max_inner + 1):
        Hd = _hess(prob, P, delta, S)
        d_Hd = _inner(delta, Hd)
        e_Pd = _inner(eta, delta)
        d_Pd = _inner(delta, delta)
        alpha = rr / d_Hd if d_Hd > 0 else math.inf
        new_e_Pe = e_Pe + 2.0 * alpha * e_Pd + alpha * alpha * d_Pd
        if d_Hd <= 0 or new_e_Pe >= radius * radius:
            # step to the boundary along delta
            tau = (-e_Pd + math.sqrt(max(e_Pd * e_Pd + d_Pd * (radius * radius - e_Pe), 0.0))) / d_Pd
            eta = eta + tau * delta
            Heta = Heta + tau * Hd
            reason = "negative_curvature" if d_Hd <= 0 else "boundary"
            break
        eta = eta + alpha * delta
        Heta = Heta + alpha * Hd
        e_Pe = new_e_Pe
        r = project_tangent(P, r + alpha * Hd)
        rr_new = _inner(r, r)
        if math.sqrt(rr_new) <= target:
            reason = "converged"
            break
        delta = -r + (rr_new / rr) * delta
        delta = project_tangent(P, delta)
        rr = rr_new
    return eta, Heta, reason, j


def tcg_step(prob, P, grad, radius, cfg=None):
    """Approximate minimizer of the trust-region model within ``radius``."""
    cfg = cfg or RtrConfig()
    S = sym(P.T @ euclidean_grad(prob, P))
    return _tcg(prob, P, np.asarray(grad, dtype=float), S, radius, cfg)[0]


def random_stiefel(m, l, rng):
    return thin_qr(rng.standard_normal((m, l))).Q


def default_start(prob, rng):
    """Polar factor of ``-Gr`` (aligned with the linear term), else random."""
    try:
        return polar(-prob.Gr)[0]
    except SingularMatrixError:
        return random_stiefel(prob.m, prob.l, rng)


def _eig_solution(prob):
    T = prob.T.to_dense() if isinstance(prob.T, SymmetricOperator) else prob.T
    mu, W = sym_eig(T)
    P = W[:, -prob.l:][:, ::-1].copy()
    TP = T @ P
    f = reduced_objective(prob, P, TP)
    return RtrResult(P, recover_multiplier(prob, P, TP), f,
                     float(np.linalg.norm(project_tangent(P, euclidean_grad(prob, P, TP)))),
                     0, True, [f])


def _rtr_single(prob, P, cfg, tol):
    m, l = prob.m, prob.l
    max_radius = cfg.max_radius or math.sqrt(m * l)
    radius = min(cfg.initial_radius or 0.1 * math.sqrt(l), max_radius)
    TP = _tp(prob, P)
    f = reduced_objective(prob, P, TP)
    history = [f]
    converged = False
    it = 0
    gnorm = math.inf
    for it in range(cfg.max_iter + 1):
        eg = euclidean_grad(prob, P, TP)
        S = sym(P.T @ eg)
        grad = eg - P @ S
        gnorm = math.sqrt(_inner(grad, grad))
        if gnorm <= tol:
            converged = True
            break
        if it == cfg.max_iter or radius < 1e-15 * max_radius:
            break
        eta, Heta, reason, _ = _tcg(prob, P, grad, S, radius, cfg)
        Pn = retract(P, eta)
        TPn = _tp(prob, Pn)
        fn = reduced_objective(prob, Pn, TPn)
        model_dec = -(_inner(grad, eta) + 0.5 * _inner(eta, Heta))
        reg = max(1.0, abs(f)) * _EPS * 1e3
        rho = (f - fn + reg) / (model_dec + reg)
        if rho < 0.25 or not np.isfinite(rho):
            radius *= 0.25
        elif rho > 0.75 and reason in ("boundary", "negative_curvature"):
            radius = min(2.0 * radius, max_radius)
        if rho > cfg.rho_prime and fn <= f + 4 * reg:
            P, TP, f = Pn, TPn, fn
            history.append(f)
    return RtrResult(P, recover_multiplier(prob, P, TP), f, gnorm, it, converged, history)


def rtr_solve(prob, P0=None, cfg=None, seed=0):
    """Minimize the reduced objective over ``m x l`` orthonormal matrices.

    Runs from ``P0`` (or the polar factor of ``-Gr``) plus ``cfg.restarts - 1``
    random feasible starts and returns the run with the lowest objective.
    A zero linear term is solved exactly by an eigendecomposition of ``T``.
    """
    cfg = cfg or RtrConfig()
    rng = np.random.default_rng(seed)
    if not np.any(prob.Gr):
        return _eig_solution(prob)
    tol = cfg.grad_tol if cfg.grad_tol is not None else default_grad_tol(prob)
    if P0 is None:
        P0 = default_start(prob, rng)
    P0 = np.asarray(P0, dtype=float)
    if P0.shape != (prob.m, prob.l):
        raise DimensionError(f"P0 has shape {P0.shape}, expected {(prob.m, prob.l)}")
    if np.linalg.norm(P0.T @ P0 - np.eye(prob.l)) > 1e-10:
        raise ContractError("P0 is not feasible (P0^T P0 != I)")
    best = _rtr_single(prob, P0, cfg, tol)
    for _ in range(cfg.restarts - 1):
        res = _rtr_single(prob, random_stiefel(prob.m, prob.l, rng), cfg, tol)
        if res.objective < best.objective - 1e-14 * (1.0 + abs(best.objective)):
            best = res
    return best
