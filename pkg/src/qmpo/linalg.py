"""Dense/sparse kernels shared by every solver in the package.

The symmetric operator wraps the three storage forms of ``H`` that occur in
practice: a dense array, a CSR sparse matrix and a low-rank Gram form
``A^T A`` that is applied as ``A^T (A X)`` and never formed.
"""

from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .errors import AsymmetricMatrixError, DimensionError, SingularMatrixError

#: Relative threshold on ``R_ii / R_11`` below which a column counts as dependent.
RANK_TOL = 1e-12

_SYM_TOL = 1e-10


class SymmetricOperator:
    """Action ``Y -> H Y`` of a real symmetric ``n x n`` matrix.

    Use the constructors :meth:`dense`, :meth:`sparse`, :meth:`gram` or
    :meth:`identity` rather than calling ``__init__`` directly.  ``scale``
    multiplies the stored matrix lazily, so normalising a problem never
    copies the data.
    """

    KINDS = ("dense", "sparse", "gram")

    def __init__(self, kind, data, scale=1.0):
        if kind not in self.KINDS:
            raise ValueError(f"unknown operator kind {kind!r}")
        self.kind = kind
        self.data = data
        self.scale = float(scale)
        if kind == "gram":
            self.n = data.shape[1]
        else:
            if data.shape[0] != data.shape[1]:
                raise DimensionError(f"H must be square, got {data.shape}")
            self.n = data.shape[0]

    @classmethod
    def dense(cls, H, check=True):
        H = np.asarray(H, dtype=float)
        if H.ndim != 2 or H.shape[0] != H.shape[1]:
            raise DimensionError(f"H must be square, got shape {H.shape}")
        if check:
            _check_symmetric(H)
        return cls("dense", H)

    @classmethod
    def sparse(cls, H, check=True):
        H = sp.csr_matrix(H, dtype=float)
        if H.shape[0] != H.shape[1]:
            raise DimensionError(f"H must be square, got shape {H.shape}")
        if check:
            diff = abs(H - H.T)
            dmax = diff.max() if diff.nnz else 0.0
            hmax = abs(H).max() if H.nnz else 0.0
            if dmax > _SYM_TOL * max(hmax, 1.0):
                raise AsymmetricMatrixError(
                    f"sparse H is not symmetric (max |H - H^T| = {dmax:.3e})")
        H.sort_indices()
        return cls("sparse", H)

    @classmethod
    def gram(cls, A):
        """``H = A^T A`` for a data matrix ``A`` of shape ``m x n``."""
        if sp.issparse(A):
            A = sp.csr_matrix(A, dtype=float)
        else:
            A = np.asarray(A, dtype=float)
            if A.ndim != 2:
                raise DimensionError("gram data matrix must be 2-D")
        return cls("gram", A)

    @classmethod
    def identity(cls, n):
        return cls("sparse", sp.identity(n, format="csr", dtype=float))

    @classmethod
    def from_matrix(cls, H):
        """Wrap a dense array or scipy sparse matrix (symmetry is checked)."""
        if isinstance(H, SymmetricOperator):
            return H
        if sp.issparse(H):
            return cls.sparse(H)
        return cls.dense(H)

    @property
    def shape(self):
        return (self.n, self.n)

    def apply(self, X):
        return apply_sym(self, X)

    def __matmul__(self, X):
        return apply_sym(self, X)

    def scaled(self, factor):
        """Operator for ``factor * H`` sharing the same storage."""
        return SymmetricOperator(self.kind, self.data, self.scale * factor)

    def to_dense(self):
        if self.kind == "dense":
            H = self.data
        elif self.kind == "sparse":
            H = self.data.toarray()
        else:
            A = self.data
            H = A.T @ A
            H = H.toarray() if sp.issparse(H) else H
        return self.scale * np.asarray(H, dtype=float)

    def abs_row_sum_bound(self):
        """Upper bound on ``max_i sum_j |H_ij|`` (hence on ``||H||_2``)."""
        if self.kind == "dense":
            b = np.abs(self.data).sum(axis=1).max()
        elif self.kind == "sparse":
            b = abs(self.data).sum(axis=1).max() if self.data.nnz else 0.0
        else:
            # |A^T A| <= |A|^T |A| entrywise, so row sums are bounded by |A|^T (|A| 1).
            absA = abs(self.data)
            b = np.max(absA.T @ (absA @ np.ones(self.n))) if self.n else 0.0
        return abs(self.scale) * float(b)

    def __repr__(self):
        return f"SymmetricOperator(kind={self.kind!r}, n={self.n}, scale={self.scale:g})"


def _check_symmetric(A):
    nrm = np.linalg.norm(A)
    if np.linalg.norm(A - A.T) > _SYM_TOL * max(nrm, 1e-300):
        raise AsymmetricMatrixError("matrix is not symmetric")


def apply_sym(op, X):
    """Return ``H X`` for a :class:`SymmetricOperator` ``op``.

    ``X`` may be a vector of length ``n`` or a block with ``n`` rows.
    """
    X = np.asarray(X, dtype=float)
    if X.shape[0] != op.n:
        raise DimensionError(f"operator has dimension {op.n}, block has {X.shape[0]} rows")
    if op.kind == "gram":
        A = op.data
        Y = A.T @ (A @ X)
    else:
        Y = op.data @ X
    Y = np.asarray(Y, dtype=float)
    if op.scale != 1.0:
        Y = op.scale * Y
    return Y


class ThinQR(NamedTuple):
    Q: np.ndarray
    R: np.ndarray
    rank: int


def thin_qr(A, rank_tol=RANK_TOL):
    """Economy QR ``A = Q R`` with a nonnegative diagonal of ``R``.

    Returns ``(Q, R, rank)`` where ``rank`` counts the diagonal entries of
    ``R`` above ``rank_tol * R[0, 0]``.  Rank deficiency is reported, not
    raised.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    n, p = A.shape
    if n < p:
        raise DimensionError(f"thin_qr needs n >= p, got {A.shape}")
    Q, R = np.linalg.qr(A, mode="reduced")
    signs = np.where(np.diag(R) < 0, -1.0, 1.0)
    Q = Q * signs
    R = signs[:, None] * R
    d = np.diag(R)
    if p == 0 or d[0] <= 0:
        rank = 0
    else:
        rank = int(np.count_nonzero(d > rank_tol * d[0]))
    return ThinQR(Q, R, rank)


def polar(Y, tol=1e-14):
    """Polar factors ``Y = Q S`` of a full column rank ``p x s`` matrix.

    ``Q`` has orthonormal columns and ``S = (Y^T Y)^{1/2}`` is symmetric
    positive definite.  Raises :class:`SingularMatrixError` when
    ``sigma_min(Y) <= tol * sigma_max(Y)``.
    """
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2 or Y.shape[0] < Y.shape[1]:
        raise DimensionError(f"polar needs p >= s, got shape {Y.shape}")
    W, sig, Vt = np.linalg.svd(Y, full_matrices=False)
    if sig.size and (sig[-1] <= tol * sig[0] or sig[0] == 0.0):
        raise SingularMatrixError(
            f"polar decomposition of a rank-deficient matrix (sigma_min = {sig[-1]:.3e})")
    Q = W @ Vt
    S = (Vt.T * sig) @ Vt
    S = 0.5 * (S + S.T)
    return Q, S


class Spectrum(NamedTuple):
    """Eigenvalues in descending order with matching orthonormal eigenvectors."""

    values: np.ndarray
    vectors: np.ndarray


def sym_eig(A, check=True):
    """Full eigendecomposition of a small dense symmetric matrix, descending."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"sym_eig needs a square matrix, got {A.shape}")
    if check:
        _check_symmetric(A)
    w, V = np.linalg.eigh(0.5 * (A + A.T))
    return Spectrum(w[::-1].copy(), V[:, ::-1].copy())


def sym(X):
    """Symmetric part ``(X + X^T) / 2``."""
    return 0.5 * (X + X.T)


def inv_sqrtm(A):
    """``A^{-1/2}`` for a symmetric positive definite ``A``."""
    mu, W = sym_eig(A)
    if mu.size and mu[-1] <= 1e-14 * max(mu[0], 1e-300):
        raise SingularMatrixError("matrix is not positive definite")
    return (W / np.sqrt(mu)) @ W.T


def norm2(A):
    """Spectral norm of a dense matrix."""
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return 0.0
    return float(np.linalg.norm(A, 2))
