"""Pressures ``q_Q(alpha)`` of model pairs and the derived curves.

For a pair ``(P, Q)`` the pressure is the growth rate of
``sum_u P_n(u) Q_n(u)^(-alpha)`` over the support of ``P_n``.  Bernoulli
pairs have a one-letter closed form, Markov pairs the log spectral radius of
the tilted matrix ``P_ij Q_ij^(-alpha)``, and everything else a finite-``n``
value by enumeration.  The waiting, nonoverlapping return and return time
pressures are then obtained from ``q_Q``, ``q_P`` and ``gamma_plus`` by
pointwise maxima.
"""

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import matrix_balance
from scipy.special import logsumexp

from . import measures
from .convex import Grid, GridFunction, default_alpha_grid, find_alpha_star, find_s0
from .core import Bernoulli, Markov, enumerate_words
from .errors import AbsoluteContinuityViolated, InstanceTooLarge, NoConvergence
from .measures import DEFAULT_HMM_N, WORD_BUDGET

POWER_TOL = 1e-12
POWER_MAX_ITER = 100_000
TAIL_ALPHA = 60.0
TAIL_STEP = 0.05


def _is_exact(m):
    return isinstance(m, (Bernoulli, Markov))


def _scalar_or_array(alpha, values):
    return float(values[0]) if np.ndim(alpha) == 0 else values


# --------------------------------------------------------------------------
# closed forms


def pressure_bernoulli(p, q, alpha):
    """``ln sum_{a in supp P} P(a) Q(a)^(-alpha)`` for Bernoulli ``p`` and ``q``."""
    p.check_alphabet(q)
    if not (isinstance(p, Bernoulli) and isinstance(q, Bernoulli)):
        raise TypeError("pressure_bernoulli needs two Bernoulli models")
    mask = p.probs > 0
    if np.any(q.probs[mask] == 0):
        raise AbsoluteContinuityViolated("P charges a letter that Q does not")
    a = np.atleast_1d(np.asarray(alpha, dtype=np.float64))
    terms = p.log_probs[mask][None, :] - a[:, None] * q.log_probs[mask][None, :]
    return _scalar_or_array(alpha, logsumexp(terms, axis=1))


def _tilted_logs(p, q, a):
    pm, qm = p.as_markov(), q.as_markov()
    # states never visited by P (null Bernoulli letters) drop out
    keep = pm.pi > 0
    if np.any(qm.pi[keep] == 0):
        raise AbsoluteContinuityViolated("P charges a letter that Q does not")
    Pk, Qk = pm.P[np.ix_(keep, keep)], qm.P[np.ix_(keep, keep)]
    mask = Pk > 0
    if np.any(Qk[mask] == 0):
        raise AbsoluteContinuityViolated("P uses a transition that Q forbids")
    lp = np.log(np.where(mask, Pk, 1.0))
    lq = np.log(np.where(mask, Qk, 1.0))
    logM = np.where(mask[None], lp[None] - a[:, None, None] * lq[None], -np.inf)
    return pm.pi[keep], qm.pi[keep], logM


def log_spectral_radius(log_matrices, tol=POWER_TOL, max_iter=POWER_MAX_ITER):
    """Log Perron root of a batch of irreducible nonnegative matrices given in log form.

    Each matrix is rescaled by its largest entry and balanced by a
    diagonal similarity, then shifted by half its smallest row sum so that
    periodic matrices converge too.  Iteration starts from the all-ones
    vector and stops once the Collatz-Wielandt bounds agree to ``tol``
    (relative).
    """
    L = np.asarray(log_matrices, dtype=np.float64)
    single = L.ndim == 2
    if single:
        L = L[None]
    B, k, _ = L.shape
    top = L.reshape(B, -1).max(axis=1)
    A = np.exp(L - top[:, None, None])
    for b in range(B):
        if k > 1:
            with np.errstate(invalid="ignore"):  # scipy casts an unused permutation vector
                _, (scale, _) = matrix_balance(A[b], permute=False, separate=True)
            A[b] = A[b] / scale[:, None] * scale[None, :]
    peak = A.reshape(B, -1).max(axis=1)
    A /= peak[:, None, None]
    shift = 0.5 * A.sum(axis=2).min(axis=1)

    v = np.ones((B, k))
    rho = np.empty(B)
    todo = np.arange(B)
    for _ in range(max_iter):
        Av = np.einsum("bij,bj->bi", A[todo], v[todo])
        ratio = Av / v[todo]
        lo, hi = ratio.min(axis=1), ratio.max(axis=1)
        done = hi - lo <= tol * hi
        rho[todo[done]] = 0.5 * (lo[done] + hi[done])
        w = Av + shift[todo, None] * v[todo]
        v[todo] = w / w.max(axis=1, keepdims=True)
        todo = todo[~done]
        if todo.size == 0:
            break
    else:
        raise NoConvergence(f"power iteration did not converge for {todo.size} matrices")
    out = np.log(rho) + np.log(peak) + top
    return float(out[0]) if single else out


def pressure_markov(p, q, alpha):
    """``ln spr(M(alpha))`` with ``M_ij = P_ij Q_ij^(-alpha)`` over edges used by ``P``.

    Bernoulli inputs are promoted to Markov chains with identical rows.
    """
    p.check_alphabet(q)
    if not (_is_exact(p) and _is_exact(q)):
        raise TypeError("pressure_markov needs Bernoulli or Markov models")
    a = np.atleast_1d(np.asarray(alpha, dtype=np.float64))
    _, _, logM = _tilted_logs(p, q, a)
    return _scalar_or_array(alpha, log_spectral_radius(logM))


def pressure(p, q, alpha):
    """Analytic pressure of an exact pair (closed form or spectral radius)."""
    if isinstance(p, Bernoulli) and isinstance(q, Bernoulli):
        return pressure_bernoulli(p, q, alpha)
    return pressure_markov(p, q, alpha)


# --------------------------------------------------------------------------
# finite n


def _finite_n_matrix(p, q, a, n):
    pi_p, pi_q, logM = _tilted_logs(p, q, a)
    logv = np.log(pi_p)[None] - a[:, None] * np.log(pi_q)[None]
    # log-domain v^T M^(n-1) 1, renormalised at every step
    acc = np.zeros(a.size)
    for _ in range(n - 1):
        logv = logsumexp(logv[:, :, None] + logM, axis=1)
        top = logv.max(axis=1)
        acc += top
        logv = logv - top[:, None]
    return (acc + logsumexp(logv, axis=1)) / n


def _finite_n_enumerate(p, q, a, n):
    size = p.alphabet.size
    if size**n > WORD_BUDGET:
        raise InstanceTooLarge(f"{size}^{n} words exceed the enumeration budget")
    words = enumerate_words(size, n)
    lp = p.log_marginals(words)
    lq = lp if q is p else q.log_marginals(words)
    on = np.isfinite(lp)
    if np.any(~np.isfinite(lq[on])):
        raise AbsoluteContinuityViolated(f"P_{n} charges a word that Q_{n} does not")
    lp, lq = lp[on], lq[on]
    out = np.empty(a.size)
    for lo in range(0, a.size, 256):
        blk = a[lo : lo + 256]
        out[lo : lo + 256] = logsumexp(lp[None, :] - blk[:, None] * lq[None, :], axis=1)
    return out / n


def pressure_finite_n(p, q, alpha, n, method="auto"):
    """``(1/n) ln sum_{u in supp P_n} P_n(u) Q_n(u)^(-alpha)``.

    Parameters
    ----------
    method : {"auto", "matrix", "enumerate"}
        ``matrix`` uses the transfer-matrix product (Bernoulli/Markov
        pairs only); ``enumerate`` sums over ``A^n``.  ``auto`` picks the
        matrix route whenever it applies.
    """
    p.check_alphabet(q)
    if n < 1:
        raise ValueError("n must be >= 1")
    a = np.atleast_1d(np.asarray(alpha, dtype=np.float64))
    if method == "auto":
        method = "matrix" if _is_exact(p) and _is_exact(q) else "enumerate"
    if method == "matrix":
        vals = _finite_n_matrix(p, q, a, n)
    elif method == "enumerate":
        vals = _finite_n_enumerate(p, q, a, n)
    else:
        raise ValueError(f"unknown method {method!r}")
    return _scalar_or_array(alpha, vals)


def _saturating(p, q, alphas, n, vals):
    """Flag ``alpha > 1`` points whose finite-``n`` values keep growing linearly in ``n``."""
    ns = [m for m in (4, 8, 12) if m <= n] or [n]
    if len(ns) < 3:
        return np.zeros(alphas.size, bool), {}
    big = alphas > 1
    if not big.any():
        return np.zeros(alphas.size, bool), {}
    seq = np.stack([pressure_finite_n(p, q, alphas[big], m, method="enumerate") for m in ns])
    d1, d2 = seq[1] - seq[0], seq[2] - seq[1]
    grow = (d1 > 1e-3) & (d2 >= 0.5 * d1)
    flags = np.zeros(alphas.size, bool)
    flags[np.flatnonzero(big)[grow]] = True
    return flags, {"n_values": ns, "raw": seq}


def pressure_samples(p, q, alphas, n=DEFAULT_HMM_N):
    """Pressure values at arbitrary ``alphas`` with the best available route.

    Returns ``(values, provenance, saturated)``.
    """
    alphas = np.asarray(alphas, dtype=np.float64)
    if _is_exact(p) and _is_exact(q):
        return np.asarray(pressure(p, q, alphas)), "analytic", np.zeros(alphas.size, bool)
    vals = pressure_finite_n(p, q, alphas, n, method="enumerate")
    sat, _ = _saturating(p, q, alphas, n, vals)
    vals = np.where(sat, np.inf, vals)
    return vals, f"finite_n({n})", sat


def dual_samples(alpha_grid=None):
    """The alpha grid extended by coarse tails out to ``+-TAIL_ALPHA``.

    Conjugating on this wider set keeps rate functions accurate near the
    ends of their effective domain.
    """
    g = alpha_grid or default_alpha_grid()
    left = np.arange(-TAIL_ALPHA, g.start, TAIL_STEP)
    right = np.arange(g.stop + TAIL_STEP, TAIL_ALPHA + TAIL_STEP / 2, TAIL_STEP)
    return np.concatenate([left, g.points, right])


# --------------------------------------------------------------------------
# report


@dataclass
class PressureReport:
    """Pressure curves and scalar functionals of a model or a model pair."""

    alpha_grid: Grid
    q_Q: GridFunction
    q_P: GridFunction
    q_W: GridFunction
    q_V: GridFunction
    q_R: GridFunction
    gamma_plus: float
    gamma_minus: float
    q_P_minus1: float
    q_Q_minus1: float
    alpha_star: float
    s0: float
    h_P: float
    h_c_PQ: float
    h_top: float
    provenance: str = "analytic"
    meta: dict = field(default_factory=dict)

    def scalars(self):
        keys = ("gamma_plus", "gamma_minus", "q_P_minus1", "q_Q_minus1", "alpha_star",
                "s0", "h_P", "h_c_PQ", "h_top")
        return {k: getattr(self, k) for k in keys}

    def to_csv(self, header=()):
        names = ("q_Q", "q_P", "q_W", "q_V", "q_R")
        lines = [f"# {h}" for h in header]
        lines.append(f"# provenance={self.provenance}")
        lines.append("alpha," + ",".join(names))
        cols = [getattr(self, k).values for k in names]
        for i, a in enumerate(self.alpha_grid.points):
            lines.append(f"{a:.10g}," + ",".join(_fmt(c[i]) for c in cols))
        return "\n".join(lines) + "\n"

    def sidecar(self, header=()):
        lines = [f"# {h}" for h in header]
        lines.append(f"provenance={self.provenance}")
        lines += [f"{k}={_fmt(v)}" for k, v in self.scalars().items()]
        return "\n".join(lines) + "\n"

    def digest(self):
        return hashlib.sha256((self.to_csv() + self.sidecar()).encode()).hexdigest()[:16]


def _fmt(v):
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".17g")


def build_report(p, q=None, alpha_grid=None, n=DEFAULT_HMM_N, step=None):
    """Assemble every :class:`PressureReport` field for ``(p, q)``; ``q=None`` means ``q = p``."""
    from . import rates  # rates builds on this module

    q = p if q is None else q
    p.check_alphabet(q)
    grid = alpha_grid or default_alpha_grid()
    a = grid.points
    qq, prov, sat_q = pressure_samples(p, q, a, n)
    qp, prov_p, sat_p = (qq, prov, sat_q) if q is p else pressure_samples(p, p, a, n)
    if prov_p != "analytic":
        prov = prov_p if prov == "analytic" else prov

    def at(x, qi, pj):
        return float(pressure_samples(qi, pj, np.array([x]), n)[0][0])

    qq_m1 = at(-1.0, p, q)
    qp_m1 = qq_m1 if q is p else at(-1.0, p, p)
    gp = measures.gamma_plus(p, n=n)
    gm = measures.gamma_minus(p, n=n)

    curve = dict(variable="alpha", provenance=prov)
    q_Q = GridFunction(grid, qq, saturated=sat_q, **curve)
    q_P = GridFunction(grid, qp, saturated=sat_p, **curve)
    q_W = GridFunction(grid, np.maximum(qq, qq_m1), **curve)
    q_V = GridFunction(grid, np.maximum(qp, qp_m1), **curve)
    q_R = GridFunction(grid, np.maximum(qp, gp), **curve)

    if _is_exact(p):
        alpha_star = find_alpha_star(lambda x: pressure(p, p, x), gp)
    else:
        alpha_star = find_alpha_star(q_P, gp)
    I_Q = rates.rate_function(p, q, step=step, n=n, alpha_grid=grid)

    return PressureReport(
        alpha_grid=grid,
        q_Q=q_Q,
        q_P=q_P,
        q_W=q_W,
        q_V=q_V,
        q_R=q_R,
        gamma_plus=gp,
        gamma_minus=gm,
        q_P_minus1=qp_m1,
        q_Q_minus1=qq_m1,
        alpha_star=alpha_star,
        s0=find_s0(I_Q),
        h_P=measures.entropy(p, n=n),
        h_c_PQ=measures.cross_entropy(p, q, n=n),
        h_top=measures.h_top_support(p, n=n),
        provenance=prov,
    )


__all__ = [
    "pressure_bernoulli",
    "pressure_markov",
    "pressure",
    "pressure_finite_n",
    "pressure_samples",
    "log_spectral_radius",
    "dual_samples",
    "PressureReport",
    "build_report",
]
