"""Numerical certification of the Krylov convergence bounds.

Given a global solution ``U*`` with multiplier ``Lambda*`` (from an oracle),
the quality of the block Krylov subspace is ``eps_k = ||(I - V V^T) U*||_F``.
The module evaluates the a-priori envelopes for ``eps_k``, the objective gap,
``||U_k - U*||_F``, the KKT residual and the multiplier error, and compares
them with measured values along a block Lanczos run.
"""

from dataclasses import asdict, dataclass, field
import logging
import math

import numpy as np
from scipy.optimize import brentq

from .baselines import dense_rtr_oracle
from .driver import QmpoProblem, _worse_than, normalize
from .errors import AssumptionError, DimensionError
from .lanczos import BasisExhaustedError, assemble_T, lanczos_extend, lanczos_init
from .linalg import apply_sym, polar, sym, sym_eig
from .rtr import ReducedProblem, RtrConfig, recover_multiplier, reduced_objective, rtr_solve

log = logging.getLogger(__name__)

#: Absolute slack added to every bound comparison (problems are scaled to ||G||_F = 1).
CHECK_ATOL = 1e-8
CHECK_RTOL = 1e-8


def subspace_distance(V, U):
    """``||(I - V V^T) U||_F`` for orthonormal ``V``."""
    V = np.asarray(V, dtype=float)
    U = np.asarray(U, dtype=float)
    if V.shape[0] != U.shape[0]:
        raise DimensionError(f"basis has {V.shape[0]} rows, U has {U.shape[0]}")
    return float(np.linalg.norm(U - V @ (V.T @ U)))


def _complement_2norm(V, U):
    R = U - V @ (V.T @ U)
    return float(np.linalg.norm(R, 2)) if R.size else 0.0


@dataclass
class KroneckerSum:
    """Spectral summary of ``(I (x) H) + (Lambda (x) I)`` from the two factor spectra."""

    mu: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        self.mu = np.sort(np.asarray(self.mu, dtype=float))[::-1]
        self.gamma = np.sort(np.asarray(self.gamma, dtype=float))[::-1]

    @property
    def sums(self):
        """All eigenvalues ``mu_j + gamma_i`` as an ``l x n`` array."""
        return self.gamma[:, None] + self.mu[None, :]

    @property
    def lam_max(self):
        return float(self.mu[0] + self.gamma[0])

    @property
    def lam_min(self):
        return float(self.mu[-1] + self.gamma[-1])

    @property
    def margin(self):
        """Distance of the spectrum from zero."""
        return float(np.min(np.abs(self.sums)))

    @property
    def norm2(self):
        return max(abs(self.lam_max), abs(self.lam_min))

    @property
    def positive_definite(self):
        return self.lam_min > 0

    @property
    def condition(self):
        m = self.margin
        return math.inf if m == 0 else self.norm2 / m

    def dense(self):
        """Explicit ``n l x n l`` matrix for a diagonal ``H`` and ``Lambda`` (tests only)."""
        n, l = self.mu.size, self.gamma.size
        return np.kron(np.eye(l), np.diag(self.mu)) + np.kron(np.diag(self.gamma), np.eye(n))


def kronecker_sum(H, Lam):
    """Explicit ``(I_l (x) H) + (Lam (x) I_n)``."""
    H = np.asarray(H, dtype=float)
    Lam = np.atleast_2d(np.asarray(Lam, dtype=float))
    return np.kron(np.eye(Lam.shape[0]), H) + np.kron(Lam, np.eye(H.shape[0]))


@dataclass
class ColumnClass:
    i: int
    kind: str
    kappa: float = None
    s: int = None
    a: float = None
    b: float = None
    phi: float = None

    def rate(self):
        c = self.kappa if self.kind == "I" else self.phi
        r = math.sqrt(c)
        return (r - 1.0) / (r + 1.0)


@dataclass
class SpectrumClassification:
    columns: list
    margin: float

    @property
    def I(self):
        return [c.i for c in self.columns if c.kind == "I"]

    @property
    def J(self):
        return [c.i for c in self.columns if c.kind == "J"]


def classify_spectrum(mu, gamma, tol=1e-10):
    """Split the multiplier eigenvalues by the definiteness of ``H + gamma_i I``.

    For ``gamma_i`` with ``H + gamma_i I`` positive definite (set ``I``) the
    rate constant is the condition number ``kappa_i``.  Otherwise (set ``J``)
    the shifted spectrum splits into a negative and a positive interval,
    both embedded into intervals of equal length ``[-a_i, neg_top]`` and
    ``[pos_bot, b_i]``, giving ``phi_i = a_i b_i / |neg_top * pos_bot|``.
    ``s_i`` counts the positive shifted eigenvalues.  Indices are 1-based.
    """
    ks = KroneckerSum(mu, gamma)
    scale = abs(ks.mu[0]) + abs(ks.gamma[0])
    if ks.margin <= tol * max(scale, 1e-300):
        raise AssumptionError(
            f"Kronecker sum is numerically singular (margin {ks.margin:.3e})")
    mu = ks.mu
    cols = []
    for i, g in enumerate(ks.gamma, start=1):
        c = mu + g
        if c[-1] > 0:
            cols.append(ColumnClass(i, "I", kappa=float(c[0] / c[-1])))
            continue
        s = int(np.count_nonzero(c > 0))
        if s == 0:
            raise AssumptionError(
                f"H + gamma_{i} I is negative definite; U* cannot be a global minimizer")
        pos_top, pos_bot = c[0], c[s - 1]
        neg_top, neg_bot = c[s], c[-1]
        a = max(-neg_bot, pos_top - pos_bot - neg_top)
        b = max(pos_top, pos_bot + neg_top - neg_bot)
        phi = a * b / abs(neg_top * pos_bot)
        cols.append(ColumnClass(i, "J", s=s, a=float(a), b=float(b), phi=float(phi)))
    return SpectrumClassification(cols, ks.margin)


def bound_eps(cls, k, variant="display"):
    """Envelope for ``eps_k`` after ``k`` Lanczos blocks.

    Inside the square root, ``variant="display"`` uses exponent ``k - 1`` on
    the indefinite terms and ``variant="proof"`` uses ``2 * floor((k + 1) / 2)``;
    both put ``2 (k + 1)`` on the definite terms.

    ``variant="krylov_degree"`` counts polynomial degrees in ``K_k``
    exactly: its members are ``p(H) V_1`` with ``deg p <= k - 1``, so the
    residual polynomial has degree ``k``, giving exponents ``2 k`` and
    ``2 * floor(k / 2)``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if variant not in ("display", "proof", "krylov_degree"):
        raise ValueError(f"unknown variant {variant!r}")
    total = 0.0
    for c in cls.columns:
        r = c.rate()
        if variant == "krylov_degree":
            total += r ** (2 * k) if c.kind == "I" else r ** (2 * (k // 2))
        elif c.kind == "I":
            total += r ** (2 * (k + 1))
        elif variant == "display":
            total += r ** (k - 1)
        else:
            total += r ** (2 * ((k + 1) // 2))
    return 2.0 * math.sqrt(total)


def bound_f(mu1, gamma1, eps):
    """Objective gap envelope ``2 (mu_1 + gamma_1) eps^2``."""
    return 2.0 * (mu1 + gamma1) * eps * eps


def check_f(problem, U_k, U_star, V, mu1, gamma1, atol=CHECK_ATOL):
    """Verdict for the objective gap of ``U_k`` against ``bound_f``."""
    if _complement_2norm(V, U_star) >= 1.0:
        return "skipped:complement_2norm>=1"
    gap = problem.objective(U_k) - problem.objective(U_star)
    bound = bound_f(mu1, gamma1, subspace_distance(V, U_star))
    return _verdict(gap, bound, atol)


def delta_and_u_bounds(ks, eps):
    """``(delta_lb, b_delta, b_cond)``.

    ``delta_lb = mu_n + gamma_l``; the bounds use it in place of the exact
    modulus.  Both U-distance bounds are ``None`` unless ``delta_lb > 0``.
    """
    d = ks.lam_min
    if d <= 0:
        return d, None, None
    b1 = math.sqrt(2.0 * ks.lam_max / d) * eps
    b2 = math.sqrt(2.0 * ks.condition) * eps
    return d, b1, b2


def bound_kkt(h_norm, u_dist=None, eps=None):
    """``(||H*||_2 ||U_k - U*||_F, sqrt(2) ||H*||_2 eps_k)``; either may be ``None``."""
    b1 = None if u_dist is None else h_norm * u_dist
    b2 = None if eps is None else math.sqrt(2.0) * h_norm * eps
    return b1, b2


def multiplier_check(problem, U_k, Lam_k, Lam_star, u_star, ks, atol=CHECK_ATOL):
    """Verdict for ``max(||R_k||, ||Lam* - Lam_k||) <= ||H*||_2 ||U_k - U*||``."""
    R = apply_sym(problem.H, U_k) + U_k @ Lam_k + problem.G
    meas = max(float(np.linalg.norm(R)), float(np.linalg.norm(Lam_star - Lam_k)))
    bound = bound_kkt(ks.norm2, float(np.linalg.norm(U_k - u_star)))[0]
    return _verdict(meas, bound, atol)


def _verdict(measured, bound, atol=CHECK_ATOL, rtol=CHECK_RTOL):
    if bound is None or not np.isfinite(measured):
        return "skipped:undefined"
    return "pass" if measured <= bound + atol + rtol * abs(bound) else "fail"


# ---------------------------------------------------------------- lemmas

def lemma_checks(trials=500, polar_trials=200, seed=0, tol=1e-10):
    """Randomized checks of the Kronecker-sum spectrum, the vec-trace identity and polar factors.

    Returns a dict mapping check name to ``{"trials", "failures", "max_err"}``.
    """
    rng = np.random.default_rng(seed)
    out = {}

    fails, worst = 0, 0.0
    for _ in range(trials):
        n, l = rng.integers(1, 9, size=2)
        X = sym(rng.standard_normal((n, n)))
        Y = sym(rng.standard_normal((l, l)))
        mu = np.linalg.eigvalsh(X)
        ga = np.linalg.eigvalsh(Y)
        ev = np.sort(np.linalg.eigvalsh(kronecker_sum(X, Y)))
        pairs = np.sort((ga[:, None] + mu[None, :]).ravel())
        scale = 1.0 + np.abs(pairs).max()
        err = max(np.abs(ev - pairs).max(),
                  abs(ev[-1] - (mu[-1] + ga[-1])), abs(ev[0] - (mu[0] + ga[0]))) / scale
        # singular exactly when some mu_j + gamma_i vanishes: shift Y to force one
        j, i = rng.integers(n), rng.integers(l)
        Ys = Y - (mu[j] + ga[i]) * np.eye(l)
        smin = np.linalg.svd(kronecker_sum(X, Ys), compute_uv=False).min()
        pmin = np.abs(np.linalg.eigvalsh(Ys)[:, None] + mu[None, :]).min()
        err = max(err, smin / scale, abs(smin - pmin) / scale)
        worst = max(worst, err)
        fails += err > tol
    out["kronecker_sum_spectrum"] = {"trials": trials, "failures": int(fails), "max_err": worst}

    fails, worst = 0, 0.0
    for _ in range(trials):
        t, s, p, q = rng.integers(1, 9, size=4)
        C = rng.standard_normal((t, s))
        E = rng.standard_normal((p, q))
        Xm = rng.standard_normal((q, s))
        Ym = rng.standard_normal((p, t))
        lhs = np.trace(C.T @ Ym.T @ E @ Xm)
        rhs = Ym.ravel(order="F") @ np.kron(C, E) @ Xm.ravel(order="F")
        err = abs(lhs - rhs) / (1.0 + abs(lhs))
        worst = max(worst, err)
        fails += err > tol
    out["vec_trace_identity"] = {"trials": trials, "failures": int(fails), "max_err": worst}

    fails, worst = 0, 0.0
    for _ in range(polar_trials):
        s = int(rng.integers(1, 9))
        p = int(rng.integers(s, 13))
        Y = rng.standard_normal((p, s))
        Q, S = polar(Y)
        err = max(np.linalg.norm(Q @ S - Y) / np.linalg.norm(Y),
                  np.linalg.norm(Q.T @ Q - np.eye(s)),
                  np.linalg.norm(S - S.T) / np.linalg.norm(S))
        if np.linalg.eigvalsh(S).min() <= 0:
            err = math.inf
        worst = max(worst, err)
        fails += err > tol
    out["polar_decomposition"] = {"trials": polar_trials, "failures": int(fails), "max_err": worst}
    return out


# ---------------------------------------------------------------- oracles

def trs_secular_oracle(H, g, max_n=500, hard_tol=1e-13):
    """Global minimizer of ``x^T H x + 2 x^T g`` on the unit sphere.

    Returns ``(x, lam)`` with ``(H + lam I) x = -g`` and ``mu_n + lam >= 0``.
    """
    H = np.asarray(H, dtype=float)
    g = np.asarray(g, dtype=float).ravel()
    n = H.shape[0]
    if H.shape != (n, n) or g.size != n:
        raise DimensionError("H must be n x n and g of length n")
    if n > max_n:
        raise DimensionError(f"secular oracle limited to n <= {max_n}")
    mu, W = sym_eig(H)
    c = W.T @ g
    gn = float(np.linalg.norm(g))
    mu_n = mu[-1]
    if gn == 0.0:
        return W[:, -1].copy(), float(-mu_n)
    spread = max(abs(mu[0] - mu_n), 1.0)
    bottom = np.abs(mu - mu_n) <= 1e-12 * spread
    easy = np.linalg.norm(c[bottom]) > hard_tol * gn

    def secular(lam):
        d = mu + lam
        with np.errstate(divide="ignore"):
            phi = float(np.sum(np.where(c != 0, c * c / (d * d), 0.0)))
        return 1.0 - 1.0 / math.sqrt(phi) if phi > 0 else -math.inf

    lo, hi = -mu_n, -mu_n + gn
    if not easy:
        rest = ~bottom
        xp = -c[rest] / (mu[rest] - mu_n)
        if float(xp @ xp) <= 1.0:
            tau = math.sqrt(max(1.0 - float(xp @ xp), 0.0))
            y = np.zeros(n)
            y[rest] = xp
            y[np.flatnonzero(bottom)[-1]] = tau
            return W @ y, float(-mu_n)
    if secular(hi) >= 0:
        lam = hi
    else:
        # secular(lo) is +1 in the easy case (pole) and >= 0 otherwise
        lam = brentq(lambda t: 1.0 if t <= lo else secular(t), lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps,
                     maxiter=500)
    x = W @ (-c / (mu + lam))
    x /= np.linalg.norm(x)
    return x, float(lam)


def balanced_svd_oracle(G, T):
    """Closed form for a square ``G``: ``P* = -W Vbar^T`` and ``f* = tr(T) - 2 sum(sigma)``."""
    G = np.atleast_2d(np.asarray(G, dtype=float))
    T = np.atleast_2d(np.asarray(T, dtype=float))
    if G.shape[0] != G.shape[1] or T.shape != G.shape:
        raise DimensionError("balanced oracle needs square G and T of the same order")
    W, sig, Vt = np.linalg.svd(G)
    return -W @ Vt, float(np.trace(T) - 2.0 * sig.sum())


# ---------------------------------------------------------------- certificate

CHECKS = ("eps", "eps_krylov_degree", "f_gap_nonneg", "f_gap", "u_dist_delta", "u_dist_cond", "kkt_udist", "kkt_eps")


@dataclass
class ConvergenceCertificate:
    name: str
    n: int
    l: int
    scale: float
    oracle: str
    oracle_objective: float
    global_check: float
    mu_max: float
    mu_min: float
    gamma: list
    kron_lam_max: float
    kron_lam_min: float
    kron_margin: float
    kron_norm2: float
    delta_lower_bound: float
    classification: dict
    assumption_ok: bool
    k: list = field(default_factory=list)
    measured: dict = field(default_factory=dict)
    bounds: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)
    skip_reasons: list = field(default_factory=list)

    def counts(self):
        out = {"pass": 0, "fail": 0, "skipped": 0}
        for series in self.verdicts.values():
            for v in series:
                out["skipped" if v.startswith("skipped") else v] += 1
        return out

    @property
    def failures(self):
        return [(name, self.k[t]) for name, series in self.verdicts.items()
                for t, v in enumerate(series) if v == "fail"]

    def to_dict(self):
        d = asdict(self)
        d["counts"] = self.counts()
        return d

    def csv_rows(self):
        """Header and rows with one line per checkpoint."""
        mkeys = list(self.measured)
        bkeys = list(self.bounds)
        header = ["k"] + mkeys + [f"bound_{b}" for b in bkeys] + [f"verdict_{c}" for c in self.verdicts]
        rows = []
        for t, k in enumerate(self.k):
            row = [k] + [self.measured[m][t] for m in mkeys] + [self.bounds[b][t] for b in bkeys]
            row += [self.verdicts[c][t] for c in self.verdicts]
            rows.append(row)
        return header, rows


def _oracle_solution(scaled, restarts, seed):
    if scaled.l == 1:
        x, lam = trs_secular_oracle(scaled.H.to_dense(), scaled.G[:, 0])
        return x[:, None], "trs_secular"
    rep = dense_rtr_oracle(scaled, restarts=restarts, seed=seed)
    return rep.U, "dense_rtr"


def certify(problem, restarts=5, seed=0, k_max=None):
    """Run block Lanczos to exhaustion and check every bound at every step.

    ``U*`` comes from the secular oracle (``l = 1``) or the dense RTR oracle;
    each reduced problem is solved with ``restarts`` trust-region starts.
    All quantities refer to the problem scaled to ``||G||_F = 1``.
    """
    if not isinstance(problem, QmpoProblem):
        raise TypeError("certify expects a QmpoProblem")
    scaled, s = normalize(problem)
    n, l = scaled.n, scaled.l
    if not n > l:
        raise DimensionError(f"need n > l, got n={n}, l={l}")
    H, G = scaled.H, scaled.G
    U_star, oracle = _oracle_solution(scaled, restarts, seed)
    HU = apply_sym(H, U_star)
    Lam_star = sym(-(U_star.T @ (HU + G)))
    glob = float(sym_eig(sym(-(U_star.T @ G))).values[-1])
    f_star = scaled.objective(U_star)
    mu = sym_eig(H.to_dense()).values
    gamma = sym_eig(Lam_star).values
    ks = KroneckerSum(mu, gamma)

    skip_reasons = []
    try:
        cls = classify_spectrum(mu, gamma)
        classification = {"I": cls.I, "J": cls.J, "columns": [asdict(c) for c in cls.columns]}
        assumption_ok = True
    except AssumptionError as exc:
        cls = None
        classification = {"error": str(exc)}
        assumption_ok = False
        skip_reasons.append(f"eps bound: {exc}")
    oracle_ok = glob >= -1e-8
    if not oracle_ok:
        skip_reasons.append(f"oracle fails the global necessary condition ({glob:.3e})")

    cert = ConvergenceCertificate(
        name=problem.name, n=n, l=l, scale=s, oracle=oracle, oracle_objective=f_star,
        global_check=glob, mu_max=float(mu[0]), mu_min=float(mu[-1]), gamma=gamma.tolist(),
        kron_lam_max=ks.lam_max, kron_lam_min=ks.lam_min, kron_margin=ks.margin,
        kron_norm2=ks.norm2, delta_lower_bound=ks.lam_min, classification=classification,
        assumption_ok=assumption_ok, skip_reasons=skip_reasons)
    meas = {m: [] for m in ("eps", "complement_2norm", "f_gap", "u_dist", "kkt", "mult_err")}
    bnds = {b: [] for b in ("eps_display", "eps_proof", "eps", "eps_krylov_degree", "f_gap", "u_dist_delta",
                            "u_dist_cond", "kkt_udist", "kkt_eps")}
    verd = {c: [] for c in CHECKS}

    k_max = k_max or n
    state = lanczos_init(H, G, seed=seed)
    rng = np.random.default_rng(seed)
    P_prev = None
    rcfg = RtrConfig(restarts=restarts)
    while True:
        exhausted = False
        try:
            lanczos_extend(state, H)
        except BasisExhaustedError:
            exhausted = True
        j = state.k if exhausted else state.complete
        T = assemble_T(state, j)
        Gk = np.zeros((j * l, l))
        Gk[:l] = state.K
        red = ReducedProblem(T, Gk)
        P0 = None
        if P_prev is not None:
            P0 = np.zeros((j * l, l))
            P0[: P_prev.shape[0]] = P_prev
        res = rtr_solve(red, P0, rcfg, seed=int(rng.integers(2**31)))
        P = res.P
        if P0 is not None and res.objective > _worse_than(reduced_objective(red, P0)):
            P = P0
        Lam_k = recover_multiplier(red, P)
        V = state.basis(j)
        U_k = V @ P
        _record(cert, meas, bnds, verd, scaled, ks, cls, j, V, U_k, Lam_k, U_star, Lam_star,
                f_star, oracle_ok)
        P_prev = P
        if state.terminated or exhausted or j >= k_max:
            break

    cert.measured, cert.bounds, cert.verdicts = meas, bnds, verd
    for name, k in cert.failures:
        log.warning("certificate %s: check %s failed at k=%d", cert.name, name, k)
    return cert


def _record(cert, meas, bnds, verd, prob, ks, cls, k, V, U_k, Lam_k, U_star, Lam_star,
            f_star, oracle_ok):
    eps = subspace_distance(V, U_star)
    c2 = _complement_2norm(V, U_star)
    gap = prob.objective(U_k) - f_star
    du = float(np.linalg.norm(U_k - U_star))
    kkt = float(np.linalg.norm(apply_sym(prob.H, U_k) + U_k @ Lam_k + prob.G))
    dl = float(np.linalg.norm(Lam_star - Lam_k))
    cert.k.append(k)
    for key, v in (("eps", eps), ("complement_2norm", c2), ("f_gap", gap), ("u_dist", du),
                   ("kkt", kkt), ("mult_err", dl)):
        meas[key].append(v)

    if cls is not None:
        b_disp, b_proof = bound_eps(cls, k, "display"), bound_eps(cls, k, "proof")
        b_eps = max(b_disp, b_proof)
        b_deg = bound_eps(cls, k, "krylov_degree")
    else:
        b_disp = b_proof = b_eps = b_deg = None
    b_f = bound_f(ks.mu[0], ks.gamma[0], eps)
    d, b_ud, b_uc = delta_and_u_bounds(ks, eps)
    b_k1, b_k2 = bound_kkt(ks.norm2, du, eps)
    for key, v in (("eps_display", b_disp), ("eps_proof", b_proof), ("eps", b_eps),
                   ("eps_krylov_degree", b_deg), ("f_gap", b_f),
                   ("u_dist_delta", b_ud), ("u_dist_cond", b_uc), ("kkt_udist", b_k1),
                   ("kkt_eps", b_k2)):
        bnds[key].append(v)

    small = c2 < 1.0
    pd = ks.positive_definite
    if not oracle_ok:
        for c in CHECKS:
            verd[c].append("skipped:oracle_not_global")
        return
    for name, b in (("eps", b_eps), ("eps_krylov_degree", b_deg)):
        verd[name].append(_verdict(eps, b) if cls is not None else "skipped:assumption_failed")
    verd["f_gap_nonneg"].append("pass" if gap >= -CHECK_ATOL else "fail")
    verd["f_gap"].append(_verdict(gap, b_f) if small else "skipped:complement_2norm>=1")
    if not pd:
        verd["u_dist_delta"].append("skipped:delta_lower_bound<=0")
        verd["u_dist_cond"].append("skipped:kronecker_not_pd")
    elif not small:
        verd["u_dist_delta"].append("skipped:complement_2norm>=1")
        verd["u_dist_cond"].append("skipped:complement_2norm>=1")
    else:
        verd["u_dist_delta"].append(_verdict(du, b_ud))
        verd["u_dist_cond"].append(_verdict(du, b_uc))
    if ks.margin > 1e-10 * (1.0 + ks.norm2) or pd:
        verd["kkt_udist"].append(_verdict(max(kkt, dl), b_k1))
    else:
        verd["kkt_udist"].append("skipped:kronecker_singular")
    if pd and small:
        verd["kkt_eps"].append(_verdict(max(kkt, dl), b_k2))
    else:
        verd["kkt_eps"].append("skipped:" + ("kronecker_not_pd" if not pd else "complement_2norm>=1"))
