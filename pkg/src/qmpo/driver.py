"""Block Lanczos solver for large-scale QMPO.

Projects ``min tr(U^T H U) + 2 tr(U^T G)`` over orthonormal ``U`` onto the
block Krylov subspace ``K_k(H, V_1)``, solves the projected problem with the
Riemannian trust-region subsolver every few steps and lifts the result back.
"""

from dataclasses import dataclass, field
import logging
import math
import time
from typing import NamedTuple, Optional

import numpy as np

from .errors import DegenerateProblemError, DimensionError, UndefinedMetricError
from .lanczos import (BasisExhaustedError, assemble_T, lanczos_extend, lanczos_init,
                      last_coupling)
from .linalg import SymmetricOperator, apply_sym
from .rtr import ReducedProblem, RtrConfig, recover_multiplier, rtr_solve

log = logging.getLogger(__name__)

TERMINATIONS = ("f_and_U_and_g_converged", "k_max", "lanczos_terminated")


@dataclass
class QmpoProblem:
    """``H`` (wrapped as :class:`SymmetricOperator`) and the ``n x l`` block ``G``."""

    H: SymmetricOperator
    G: np.ndarray
    name: str = ""
    source: str = ""

    def __post_init__(self):
        self.H = SymmetricOperator.from_matrix(self.H)
        self.G = np.asarray(self.G, dtype=float)
        if self.G.ndim == 1:
            self.G = self.G[:, None]
        if self.G.shape[0] != self.H.n:
            raise DimensionError(f"G has {self.G.shape[0]} rows, H has dimension {self.H.n}")

    @property
    def n(self):
        return self.H.n

    @property
    def l(self):
        return self.G.shape[1]

    def objective(self, U):
        HU = apply_sym(self.H, U)
        return float(np.vdot(U, HU) + 2.0 * np.vdot(U, self.G))


@dataclass
class SolverConfig:
    """Stopping tolerances and budgets.

    ``k_max`` bounds Lanczos steps, ``max_checkpoints`` bounds reduced solves
    and ``m_max`` caps the basis width ``k * l``.
    """

    eps_f: float = 1e-10
    eps_u: float = 1e-6
    eps_g: float = 1e-5
    k_max: int = 1000
    max_checkpoints: int = 1000
    solve_every: int = 5
    m_max: int = 5000
    rtr: RtrConfig = field(default_factory=RtrConfig)
    seed: int = 0

    def __post_init__(self):
        if min(self.eps_f, self.eps_u, self.eps_g) <= 0:
            raise ValueError("tolerances must be positive")
        if self.k_max < 1 or self.solve_every < 1 or self.max_checkpoints < 1 or self.m_max < 1:
            raise ValueError("k_max, solve_every, max_checkpoints and m_max must be >= 1")


@dataclass
class Checkpoint:
    k: int
    f: float
    kkt: float
    du: Optional[float]
    wall_ms: float


@dataclass
class SolveReport:
    U: np.ndarray
    Lambda: np.ndarray
    objective: float
    kkt_residual: float
    history: list
    termination: str
    scale: float
    solver: str = "block_lanczos"
    steps: int = 0
    basis_dim: int = 0
    wall_ms: float = 0.0
    diagnostic: str = ""

    @property
    def unscaled_objective(self):
        return self.scale * self.objective

    @property
    def unscaled_kkt(self):
        return self.scale * self.kkt_residual


def normalize(problem):
    """Divide ``H`` and ``G`` by ``s = ||G||_F``; returns ``(scaled, s)``."""
    s = float(np.linalg.norm(problem.G))
    if s == 0.0:
        raise DegenerateProblemError(
            "G = 0: solve the eigenvalue problem with rtr_solve on a zero linear term")
    scaled = QmpoProblem(problem.H.scaled(1.0 / s), problem.G / s,
                         problem.name, problem.source)
    return scaled, s


def direct_kkt(problem, U, Lam):
    """``||H U + U Lambda + G||_F``."""
    U = np.asarray(U, dtype=float)
    if U.shape != problem.G.shape or np.shape(Lam) != (problem.l, problem.l):
        raise DimensionError("U or Lambda does not match the problem shape")
    return float(np.linalg.norm(apply_sym(problem.H, U) + U @ Lam + problem.G))


def cheap_kkt(state, P, Lam, Gk, T=None):
    """KKT residual of ``U = V_k P`` from reduced quantities only.

    ``sqrt(||T_k P + P Lambda + G_k||_F^2 + ||N_k P_last||_F^2)`` where
    ``P_last`` are the last ``l`` rows of ``P``.
    """
    l = state.l
    j = P.shape[0] // l
    if P.shape[0] != j * l:
        raise DimensionError("P row count is not a multiple of the block size")
    T = assemble_T(state, j) if T is None else T
    first = np.linalg.norm(T @ P + P @ Lam + Gk)
    C = last_coupling(state, j)
    second = 0.0 if C is None else np.linalg.norm(C @ P[-l:])
    return float(math.hypot(first, second))


def lift(state, P):
    """``U = V_k P`` for a reduced solution ``P`` with ``k l`` rows."""
    l = state.l
    j = P.shape[0] // l
    if P.shape[0] != j * l or j > state.k:
        raise DimensionError(f"P has {P.shape[0]} rows, basis has {state.k * l} columns")
    return state.basis(j) @ P


class StopDecision(NamedTuple):
    stop: bool
    reason: Optional[str]


def stopping(history, cfg, k=None):
    """Apply the three-way stopping rule to the latest checkpoint.

    Relative objective change, ``||U_k - U_prev||_F / sqrt(n)`` and the KKT
    residual must all be under their tolerances; the first checkpoint never
    stops on the difference terms.  When the rule fails and ``k >= k_max``
    the decision is to stop with reason ``"k_max"``.
    """
    if history:
        cur = history[-1]
        if len(history) >= 2 and cur.du is not None:
            prev = history[-2]
            df = abs(prev.f - cur.f) / (abs(prev.f) + 1.0)
            if df <= cfg.eps_f and cur.du <= cfg.eps_u and cur.kkt <= cfg.eps_g:
                return StopDecision(True, "f_and_U_and_g_converged")
    if k is not None and k >= cfg.k_max:
        return StopDecision(True, "k_max")
    return StopDecision(False, None)


def rel_obj_diff(f_candidate, f_best):
    """``(f_candidate - f_best) / |f_best|``."""
    if f_best == 0:
        raise UndefinedMetricError("relative objective difference undefined for f_best = 0")
    return (f_candidate - f_best) / abs(f_best)


def _worse_than(f):
    # objective level a fresh reduced solve must exceed before the warm start is kept
    return f + 1e-14 * (1.0 + abs(f))


def _pad(P, rows):
    out = np.zeros((rows, P.shape[1]))
    out[: P.shape[0]] = P
    return out


def solve(problem, cfg=None):
    """Run the block Lanczos method on ``problem``.

    Objective and KKT residual in the report refer to the problem scaled by
    ``1 / ||G||_F``; ``report.scale`` holds the factor.
    """
    cfg = cfg or SolverConfig()
    t0 = time.perf_counter()
    n, l = problem.n, problem.l
    if not n > l >= 1:
        raise DimensionError(f"need n > l >= 1, got n={n}, l={l}")
    scaled, s = normalize(problem)
    H = scaled.H
    state = lanczos_init(H, scaled.G, seed=cfg.seed)

    history = []
    P_prev = None
    f_prev = None
    diagnostic = ""
    while True:
        exhausted = False
        try:
            lanczos_extend(state, H)
        except BasisExhaustedError as exc:
            exhausted = True
            diagnostic = str(exc)
        j = state.k if exhausted else state.complete
        over_width = (j + 1) * l > cfg.m_max
        last = state.terminated or exhausted or j >= cfg.k_max or over_width
        if j % cfg.solve_every and not last:
            continue

        T = assemble_T(state, j)
        Gk = np.zeros((j * l, l))
        Gk[:l] = state.K
        P0 = None if P_prev is None else _pad(P_prev, j * l)
        reduced = ReducedProblem(T, Gk)
        res = rtr_solve(reduced, P0, cfg.rtr, seed=cfg.seed + len(history))
        P, Lam, f = res.P, res.Lambda, res.objective
        if not res.converged:
            log.debug("reduced solve at k=%d stopped with gradient %.3e", j, res.grad_norm)
        if f_prev is not None and f > _worse_than(f_prev):
            # the padded warm start is feasible and attains f_prev
            P, f = P0, f_prev
            Lam = recover_multiplier(reduced, P)
        kkt = cheap_kkt(state, P, Lam, Gk, T)
        du = None if P0 is None else float(np.linalg.norm(P - P0)) / math.sqrt(n)
        history.append(Checkpoint(j, f, kkt, du, 1e3 * (time.perf_counter() - t0)))
        P_prev, f_prev = P, f

        if state.terminated:
            reason = "lanczos_terminated"
        else:
            decision = stopping(history, cfg, j)
            reason = decision.reason
            if reason is None and (last or len(history) >= cfg.max_checkpoints):
                reason = "k_max"
        if over_width and reason == "k_max":
            diagnostic = diagnostic or f"basis width {(j + 1) * l} would exceed m_max={cfg.m_max}"
        if reason is not None:
            break

    U = lift(state, P_prev)
    return SolveReport(
        U=U, Lambda=Lam, objective=f_prev, kkt_residual=history[-1].kkt,
        history=history, termination=reason, scale=s, steps=j, basis_dim=j * l,
        wall_ms=1e3 * (time.perf_counter() - t0), diagnostic=diagnostic)

