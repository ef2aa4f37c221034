"""Problem builders: random sparse instances, regression and graph embedding."""

from dataclasses import dataclass
import logging

import numpy as np
import scipy.sparse as sp
from scipy.spatial.distance import cdist

from .driver import QmpoProblem
from .errors import DimensionError, GraphDegeneracyError, SingularMatrixError, SplitError
from .linalg import SymmetricOperator, inv_sqrtm, sym
from .mmio import read_matrix_market

log = logging.getLogger(__name__)

#: Dense similarity graphs are quadratic in the sample count.
MAX_GRAPH_SAMPLES = 30000


def gen_synthetic(n, l, density, seed=0):
    """``H = B + B^T`` with ``B`` sparse uniform(0, 1) at ``density``, ``G`` standard normal.

    ``density = 0`` gives ``H = 0``.
    """
    if not 0 <= density <= 1:
        raise ValueError(f"density must lie in [0, 1], got {density}")
    if not n > l >= 1:
        raise DimensionError(f"need n > l >= 1, got n={n}, l={l}")
    rng = np.random.default_rng(seed)
    B = sp.random(n, n, density=density, format="csr", random_state=rng,
                  data_rvs=rng.random)
    H = (B + B.T).tocsr()
    H.sort_indices()
    G = rng.standard_normal((n, l))
    return QmpoProblem(SymmetricOperator.sparse(H, check=False), G,
                       name=f"synthetic-n{n}-l{l}-d{density:g}-s{seed}", source="synthetic")


@dataclass
class LabeledDataset:
    """Features-by-samples data ``X`` with integer labels ``1..l``."""

    X: np.ndarray
    labels: np.ndarray
    l: int = None

    def __post_init__(self):
        self.X = np.asarray(self.X.toarray() if sp.issparse(self.X) else self.X, dtype=float)
        if self.X.ndim != 2:
            raise DimensionError("X must be 2-D (features x samples)")
        self.labels = np.asarray(self.labels, dtype=int).ravel()
        if self.labels.size != self.X.shape[1]:
            raise DimensionError(
                f"{self.labels.size} labels for {self.X.shape[1]} samples")
        if self.l is None:
            self.l = int(self.labels.max()) if self.labels.size else 0
        if self.l < 1 or self.labels.min() < 1 or self.labels.max() > self.l:
            raise ValueError(f"labels must lie in 1..{self.l}")
        if self.X.shape[1] < self.l:
            raise DimensionError("need at least as many samples as classes")

    @property
    def n_features(self):
        return self.X.shape[0]

    @property
    def n_samples(self):
        return self.X.shape[1]


def center(X):
    """Subtract the mean over samples (columns)."""
    X = np.asarray(X, dtype=float)
    return X - X.mean(axis=1, keepdims=True)


def class_indicator(labels, l):
    """``l x m`` matrix with column ``i`` equal to ``e_{labels[i]}``."""
    labels = np.asarray(labels, dtype=int)
    B = np.zeros((l, labels.size))
    B[labels - 1, np.arange(labels.size)] = 1.0
    return B


def build_olsr(dataset, train_fraction=0.30, seed=0):
    """Orthogonal least squares regression on a random training split.

    With ``A`` the centered ``n x m`` training features and ``B`` the centered
    ``l x m`` class indicator, ``H = A A^T`` (kept as a Gram operator on
    ``A^T``) and ``G = A B^T``.
    """
    if not 0 < train_fraction <= 1:
        raise ValueError("train_fraction must lie in (0, 1]")
    m = dataset.n_samples
    size = max(1, int(round(train_fraction * m)))
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(m, size=size, replace=False))
    labels = dataset.labels[idx]
    if np.unique(labels).size < 2:
        raise SplitError(
            f"training split with seed={seed} holds a single class; "
            "try another seed or a larger train_fraction")
    A = center(dataset.X[:, idx])
    B = center(class_indicator(labels, dataset.l))
    G = A @ B.T
    return QmpoProblem(SymmetricOperator.gram(A.T), G,
                       name=f"olsr-m{size}-s{seed}", source="olsr")


@dataclass
class GraphConfig:
    t: float = 0.1
    gamma: float = 1.0

    def __post_init__(self):
        if self.t <= 0 or self.gamma <= 0:
            raise ValueError("t and gamma must be positive")


def heat_kernel(X, t):
    """``W_ij = exp(-||x_i - x_j||^2 / (2 t^2))`` over the sample columns of ``X``."""
    pts = np.asarray(X, dtype=float).T
    d2 = cdist(pts, pts, "sqeuclidean")
    return np.exp(-d2 / (2.0 * t * t))


def normalized_adjacency(W):
    """``D^{-1/2} W D^{-1/2}`` and the degree vector."""
    W = np.asarray(W, dtype=float)
    d = W.sum(axis=1)
    bad = np.flatnonzero(d <= 0)
    if bad.size:
        raise GraphDegeneracyError(f"isolated vertices (zero degree): {bad[:10].tolist()}")
    s = 1.0 / np.sqrt(d)
    Wn = s[:, None] * W * s[None, :]
    return 0.5 * (Wn + Wn.T), d


def degree_weighted_indicator(d, Y):
    """``C = D^{1/2} Y (Y^T D Y)^{-1/2}`` for a degree vector ``d``."""
    Y = np.asarray(Y, dtype=float)
    M = Y.T @ (d[:, None] * Y)
    try:
        inv_sqrt = inv_sqrtm(sym(M))
    except SingularMatrixError:
        raise GraphDegeneracyError("Y^T D Y is singular (empty cluster?)") from None
    return np.sqrt(d)[:, None] * Y @ inv_sqrt


def build_gcsed(dataset, cfg=None, Y=None):
    """Spectral embedding step of graph clustering: ``H = -W_hat``, ``G = -gamma C``.

    ``Y`` is an ``m x l`` cluster indicator; by default the dataset labels.
    """
    cfg = cfg or GraphConfig()
    m = dataset.n_samples
    if m > MAX_GRAPH_SAMPLES:
        raise DimensionError(f"dense graph limited to {MAX_GRAPH_SAMPLES} samples, got {m}")
    if Y is None:
        Y = class_indicator(dataset.labels, dataset.l).T
    Y = np.asarray(Y, dtype=float)
    if Y.shape[0] != m:
        raise DimensionError(f"Y has {Y.shape[0]} rows for {m} samples")
    if not (np.all((Y == 0) | (Y == 1)) and np.all(Y.sum(axis=1) == 1)):
        raise ValueError("Y must have exactly one 1 per row")
    W = heat_kernel(dataset.X, cfg.t)
    Wn, d = normalized_adjacency(W)
    C = degree_weighted_indicator(d, Y)
    return QmpoProblem(SymmetricOperator.dense(-Wn, check=False), -cfg.gamma * C,
                       name=f"gcsed-m{m}-t{cfg.t:g}-g{cfg.gamma:g}", source="gcsed")


def read_dataset(data_path, labels_path):
    """Features-by-samples Matrix Market file plus one integer label per line."""
    X = read_matrix_market(data_path)
    with open(labels_path, encoding="utf-8") as fh:
        tokens = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    try:
        labels = np.array([int(t) for t in tokens])
    except ValueError as exc:
        raise ValueError(f"{labels_path}: labels must be integers ({exc})") from None
    return LabeledDataset(X, labels)


def load_problem(h_path, g_path, name=""):
    """``H`` and ``G`` from Matrix Market files."""
    H = read_matrix_market(h_path)
    G = read_matrix_market(g_path)
    if sp.issparse(G):
        G = G.toarray()
    op = SymmetricOperator.sparse(H) if sp.issparse(H) else SymmetricOperator.dense(H)
    return QmpoProblem(op, G, name=name or str(h_path), source="file")
