"""Block Lanczos process with full reorthogonalization.

The state after ``lanczos_init`` holds ``V_1`` and ``M_1`` (``k = 1``).  Each
``lanczos_extend`` forms ``L_k = H V_k - V_k M_k - V_{k-1} N_{k-1}^T``,
reorthogonalizes it against the whole basis and factors it as
``V_{k+1} N_k``, so after ``k`` blocks the relation

    H [V_1..V_{k-1}] = [V_1..V_{k-1}] T_{k-1} + V_k N_{k-1} E^T

is available for the first ``k - 1`` blocks.  When ``L_k`` vanishes the
state is flagged ``terminated``: ``range(V)`` is an invariant subspace and the
relation holds for all ``k`` blocks with no remainder.
"""

import numpy as np

from .errors import ContractError, DegenerateProblemError, DimensionError
from .linalg import RANK_TOL, apply_sym, norm2, sym, thin_qr

TERMINATION_TOL = 1e-12


class BasisExhaustedError(ContractError):
    """The next block would need more than ``n`` orthonormal columns."""


class BlockLanczosState:
    """Mutable state of the block recurrence; see the module docstring."""

    def __init__(self, l, V1, K, M1, HV1, rng):
        self.l = l
        self.V = [V1]
        self.M = [M1]
        self.N = []
        self.K = K
        self.k = 1
        self.terminated = False
        self.deflations = 0
        self.norm_est = norm2(M1)
        self.pending_L = None
        self._HV_last = HV1
        self._basis = V1
        self._rng = rng

    @property
    def n(self):
        return self.V[0].shape[0]

    @property
    def complete(self):
        """Number of leading blocks for which the Lanczos relation is closed."""
        return self.k if self.terminated else self.k - 1

    def basis(self, j=None):
        """``n x j*l`` matrix ``[V_1, ..., V_j]`` (all blocks by default)."""
        j = self.k if j is None else j
        return self._basis[:, : j * self.l]

    def __repr__(self):
        return (f"BlockLanczosState(n={self.n}, l={self.l}, k={self.k}, "
                f"terminated={self.terminated}, deflations={self.deflations})")


def lanczos_init(H, G, seed=0):
    """Start the recurrence from the economy QR ``G = V_1 K``."""
    G = np.asarray(G, dtype=float)
    if G.ndim == 1:
        G = G[:, None]
    n, l = G.shape
    if n != H.n:
        raise DimensionError(f"G has {n} rows, H has dimension {H.n}")
    if not n > l >= 1:
        raise DimensionError(f"need n > l >= 1, got n={n}, l={l}")
    if not np.any(G):
        raise DegenerateProblemError("G = 0; the problem is a pure eigenvalue problem")
    rng = np.random.default_rng(seed)
    V1, K, rank = thin_qr(G)
    if rank < l:
        V1, K, _ = _deflated_qr(G, np.zeros((n, 0)), rng)
    HV1 = apply_sym(H, V1)
    M1 = sym(V1.T @ HV1)
    return BlockLanczosState(l, V1, K, M1, HV1, rng)


def lanczos_extend(state, H):
    """Add ``V_{k+1}``, ``N_k`` and ``M_{k+1}``; flag termination if ``L_k = 0``."""
    if state.terminated:
        raise ContractError("lanczos_extend called on a terminated state")
    if state.pending_L is not None:
        raise BasisExhaustedError("basis cannot grow past the problem dimension")
    k, l = state.k, state.l
    Vk = state.V[-1]
    L = state._HV_last - Vk @ state.M[-1]
    if k > 1:
        L -= state.V[-2] @ state.N[-1].T
    B = state._basis
    for _ in range(2):
        L -= B @ (B.T @ L)

    if np.linalg.norm(L) <= TERMINATION_TOL * (1.0 + state.norm_est):
        state.terminated = True
        state.pending_L = None
        return state
    if (k + 1) * l > state.n:
        state.pending_L = L
        raise BasisExhaustedError(
            f"cannot add a block of {l} columns to a basis of {k * l} in dimension {state.n}")

    Q, R, rank = _deflated_qr(L, B, state._rng, abs_tol=TERMINATION_TOL * (1.0 + state.norm_est))
    if rank < l:
        state.deflations += 1
    HQ = apply_sym(H, Q)
    Mn = sym(Q.T @ HQ)

    state.V.append(Q)
    state.N.append(R)
    state.M.append(Mn)
    state._HV_last = HQ
    state._basis = np.concatenate([B, Q], axis=1)
    state.k = k + 1
    state.norm_est = max(state.norm_est, norm2(Mn), norm2(R))
    return state


def _deflated_qr(L, basis, rng, rank_tol=RANK_TOL, abs_tol=0.0):
    """Column-wise QR of ``L`` orthogonal to ``basis``, replacing dependent directions.

    Each column is orthogonalized twice against ``basis`` and the columns
    before it; the components along ``basis`` are rounding noise (``L`` is
    already orthogonal to it) and are dropped.  A column whose remainder is
    below ``max(abs_tol, rank_tol * max column norm)`` gets a zero diagonal in
    ``R`` and a random unit direction orthogonal to everything before it, so
    ``[basis, Q]`` stays orthonormal and ``L = Q R`` holds up to rounding.
    """
    n, l = L.shape
    Q = np.zeros((n, l))
    R = np.zeros((l, l))
    tol = max(abs_tol, rank_tol * np.linalg.norm(L, axis=0).max())
    rank = 0
    for j in range(l):
        w = L[:, j].copy()
        for _ in range(2):
            w -= basis @ (basis.T @ w)
            c = Q[:, :j].T @ w
            R[:j, j] += c
            w -= Q[:, :j] @ c
        nrm = np.linalg.norm(w)
        if nrm > tol:
            R[j, j] = nrm
            Q[:, j] = w / nrm
            rank += 1
            continue
        # dependent column: its remainder is rounding noise, drop it
        for _attempt in range(10):
            q = rng.standard_normal(n)
            for _ in range(2):
                q -= basis @ (basis.T @ q)
                q -= Q[:, :j] @ (Q[:, :j].T @ q)
            qn = np.linalg.norm(q)
            if qn > 1e-8:
                Q[:, j] = q / qn
                break
        else:
            raise BasisExhaustedError("no room left for a replacement direction")
    return Q, R, rank


def assemble_T(state, j=None):
    """Block tridiagonal ``T_j`` (``j`` blocks, default all) built from ``M``, ``N``."""
    j = state.k if j is None else j
    if not 1 <= j <= state.k:
        raise DimensionError(f"T_{j} requested from a state with {state.k} blocks")
    l = state.l
    T = np.zeros((j * l, j * l))
    for i in range(j):
        T[i * l:(i + 1) * l, i * l:(i + 1) * l] = state.M[i]
        if i + 1 < j:
            Ni = state.N[i]
            T[(i + 1) * l:(i + 2) * l, i * l:(i + 1) * l] = Ni
            T[i * l:(i + 1) * l, (i + 1) * l:(i + 2) * l] = Ni.T
    return T


def residual_block(state, j):
    """``V_{j+1} N_j`` for ``j`` blocks, or ``None`` if the remainder is zero."""
    if j < state.k:
        return state.V[j] @ state.N[j - 1]
    if state.terminated:
        return None
    if state.pending_L is not None:
        return state.pending_L
    raise ContractError(f"remainder of step {j} is not computed yet; extend first")


def last_coupling(state, j):
    """Matrix ``C`` with ``||C x||_F = ||V_{j+1} N_j x||_F`` for every ``x``."""
    if j < state.k:
        return state.N[j - 1]
    if state.terminated:
        return None
    if state.pending_L is not None:
        return state.pending_L
    raise ContractError(f"remainder of step {j} is not computed yet; extend first")


def relation_residual(state, H, j=None):
    """``||H V_j - V_j T_j - V_{j+1} N_j E_l^T||_F`` for ``j`` blocks.

    ``j`` defaults to the largest closed step (:attr:`BlockLanczosState.complete`).
    """
    j = state.complete if j is None else j
    if j == 0:
        return 0.0
    Vj = state.basis(j)
    T = assemble_T(state, j)
    E = apply_sym(H, Vj) - Vj @ T
    rem = residual_block(state, j)
    if rem is not None:
        E[:, -state.l:] -= rem
    return float(np.linalg.norm(E))
