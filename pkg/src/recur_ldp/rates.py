"""Rate functions of the three estimators, built from pressures.

``I_Q`` is the conjugate of ``q_Q``.  The waiting and nonoverlapping return
time rates are ``inf_{r >= s} (r - s + I(r))``: a suffix minimum of
``r + I(r)`` followed by a shift.  The return time rate is the same curve
with the single point ``s = 0`` lowered to ``-gamma_plus``, which is what
breaks convexity in the generic case.
"""

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import measures
from .convex import (
    DEFAULT_STEP,
    Grid,
    GridFunction,
    conjugate_points,
    default_alpha_grid,
    default_s_grid,
    is_convex,
)
from .core import Bernoulli, Markov
from .errors import UnsupportedModel
from .measures import DEFAULT_HMM_N

SCALAR_TOL = 1e-6


def _zero_index(grid):
    i = grid.index(0.0)
    if abs(grid.points[i]) > grid.step / 2:
        raise ValueError("the s-grid must contain the point 0")
    return i


def rate_IQ(q_Q, s_grid=None, support=None):
    """Conjugate of a sampled pressure, set to ``+inf`` for ``s < 0``.

    Parameters
    ----------
    q_Q : GridFunction
        Pressure sampled on an alpha grid.
    s_grid : Grid, optional
        Defaults to ``[-0.5, 5]``.
    support : (float, float), optional
        Effective domain ``[lo, hi]``; grid points further than half a step
        outside it become ``+inf`` and points within half a step take the
        value at the nearest end.
    """
    s_grid = s_grid or Grid(-0.5, 5.0, DEFAULT_STEP)
    fin = q_Q.finite
    return _rate_from_samples(q_Q.points[fin], q_Q.values[fin], s_grid, support, q_Q.provenance)


def _rate_from_samples(alphas, qvals, s_grid, support, provenance):
    s = s_grid.points
    half = s_grid.step / 2
    lo, hi = support if support is not None else (-math.inf, math.inf)
    inside = (s >= max(lo, 0.0) - half) & (s <= hi + half) & (s >= -half)
    where = np.clip(s, lo, hi)
    vals, _, low, high = conjugate_points(alphas, qvals, where)
    out = np.where(inside, vals, np.inf)
    sat = (low | high) & inside
    if support is not None:
        sat[:] = False  # support clipping already encodes the domain
    clipped = inside & ((s < lo) | (s > hi))
    return GridFunction(s_grid, out, variable="s", saturated=sat, provenance=provenance,
                        meta={"clipped": clipped})


def rate_function(p, q=None, s_grid=None, step=None, n=DEFAULT_HMM_N, alpha_grid=None):
    """``I_Q`` for the pair ``(p, q)`` (``q = p`` by default) on the default s-grid.

    The pressure is sampled on the alpha grid extended by coarse tails and
    conjugated; the result is clipped to the effective domain.
    """
    from .pressure import dual_samples, pressure_samples

    q = p if q is None else q
    step = step or (s_grid.step if s_grid else DEFAULT_STEP)
    support = measures.support_rate_interval(p, None if q is p else q, n=n)
    if s_grid is None:
        s_grid = default_s_grid(-max(-measures.gamma_minus(p, n=n), support[1]), step)
    alphas = dual_samples(alpha_grid or default_alpha_grid(step))
    vals, prov, sat = pressure_samples(p, q, alphas, n)
    keep = np.isfinite(vals)
    return _rate_from_samples(alphas[keep], vals[keep], s_grid, support, prov)


def rate_at(p, s, q=None, n=DEFAULT_HMM_N, alpha_grid=None):
    """``I_Q`` at arbitrary points ``s`` (no s-grid rounding).

    Same conjugation as :func:`rate_function`, evaluated directly at ``s``;
    ``+inf`` outside the effective domain.
    """
    from .pressure import dual_samples, pressure_samples

    q = p if q is None else q
    lo, hi = measures.support_rate_interval(p, None if q is p else q, n=n)
    alphas = dual_samples(alpha_grid or default_alpha_grid())
    vals, _, _ = pressure_samples(p, q, alphas, n)
    keep = np.isfinite(vals)
    s = np.asarray(s, dtype=np.float64)
    tol = 1e-12 * (1.0 + abs(hi))
    inside = (s >= lo - tol) & (s <= hi + tol)
    out = conjugate_points(alphas[keep], vals[keep], np.clip(s, lo, hi).reshape(-1))[0].reshape(s.shape)
    out = np.where(inside, out, np.inf)
    return float(out) if out.ndim == 0 else out


def _suffix_rate(I):
    s = I.points
    g = np.where(s >= -I.step / 2, s + I.values, np.inf)
    best = np.minimum.accumulate(g[::-1])[::-1]
    out = np.where(s >= -I.step / 2, best - s, np.inf)
    out = np.where(np.isfinite(out), np.maximum(out, 0.0), np.inf)
    meta = dict(I.meta)
    if "clipped" in meta:
        # left of the domain the suffix infimum is a genuine value; only the right end stays clipped
        c = np.asarray(meta["clipped"], bool)
        real = np.flatnonzero(I.finite & ~c)
        meta["clipped"] = c & (np.arange(c.size) > real[-1]) if real.size else c
    return I.replace(out, meta=meta)


def build_IW(I_Q):
    """Waiting time rate ``inf_{r >= s} (r - s + I_Q(r))`` for ``s >= 0``."""
    return _suffix_rate(I_Q)


def build_IV(I_P):
    """Nonoverlapping return time rate; same construction as :func:`build_IW`."""
    return _suffix_rate(I_P)


def build_IR(I_P, gamma_plus):
    """Return time rate: :func:`build_IV` with the point ``s = 0`` set to ``-gamma_plus``."""
    I_V = build_IV(I_P)
    vals = I_V.values.copy()
    vals[_zero_index(I_P.grid)] = -gamma_plus
    return I_V.replace(vals)


@dataclass(frozen=True)
class ZeroSet:
    """Interval ``[lo, hi]`` on which a rate function vanishes (up to ``tol``)."""

    lo: float
    hi: float
    right_saturated: bool
    tol: float

    @property
    def width(self):
        return self.hi - self.lo


def zero_set(I, tol=None):
    """Contiguous run of grid points with ``I <= tol`` around the minimiser.

    Returns ``None`` when no point qualifies.  ``right_saturated`` marks a
    run reaching the right end of the grid, i.e. a flat tail.
    """
    tol = 10 * I.step if tol is None else tol
    ok = I.values <= tol
    if not ok.any():
        return None
    i = int(np.argmin(I.values))
    a = i
    while a > 0 and ok[a - 1]:
        a -= 1
    b = i
    while b < ok.size - 1 and ok[b + 1]:
        b += 1
    return ZeroSet(float(I.points[a]), float(I.points[b]), b == ok.size - 1, tol)


@dataclass(frozen=True)
class RateCurves:
    I_Q: GridFunction
    I_P: GridFunction
    I_W: GridFunction
    I_V: GridFunction
    I_R: GridFunction


def build_rates(p, q=None, s_grid=None, step=None, n=DEFAULT_HMM_N):
    """All five rate curves for ``(p, q)`` on one shared s-grid."""
    q = p if q is None else q
    if s_grid is None:
        step = step or DEFAULT_STEP
        hi = -measures.gamma_minus(p, n=n)
        if q is not p:
            hi = max(hi, measures.support_rate_interval(p, q, n=n)[1])
        s_grid = default_s_grid(-hi, step)
    I_P = rate_function(p, s_grid=s_grid, n=n)
    I_Q = I_P if q is p else rate_function(p, q, s_grid=s_grid, n=n)
    gp = measures.gamma_plus(p, n=n)
    return RateCurves(I_Q, I_P, build_IW(I_Q), build_IV(I_P), build_IR(I_P, gp))


@dataclass(frozen=True)
class ConvexityVerdict:
    """Truth values of the convexity-equivalence clauses for one model."""

    IR_convex: bool
    IR_equals_IV: bool
    qR_equals_qV: bool
    gammaPlus_equals_qPm1: bool
    IP_at_minus_gammaPlus_zero: bool
    qP_affine_on_negatives: bool
    gammaPlus_equals_gammaMinus: bool
    hP_equals_hTop: bool
    scalar_tol: float
    grid_tol: float
    equivalence_certified: bool = True

    CORE = (
        "IR_convex",
        "IR_equals_IV",
        "qR_equals_qV",
        "gammaPlus_equals_qPm1",
        "IP_at_minus_gammaPlus_zero",
        "qP_affine_on_negatives",
    )

    @property
    def consistent(self):
        """The six core clauses agree, and the two sufficient ones never contradict them."""
        core = {getattr(self, k) for k in self.CORE}
        if len(core) != 1:
            return False
        if self.equivalence_certified:
            return {self.gammaPlus_equals_gammaMinus, self.hP_equals_hTop} == core
        return not (self.gammaPlus_equals_gammaMinus and not core.pop())

    def to_text(self):
        d = asdict(self)
        d["consistent"] = self.consistent
        return "\n".join(f"{k}={str(v).lower() if isinstance(v, bool) else v}" for k, v in d.items()) + "\n"


def convexity_verdict(model, step=DEFAULT_STEP, scalar_tol=SCALAR_TOL, grid_tol=None):
    """Evaluate every clause with closed forms and grid checks.

    Scalar identities use ``scalar_tol``; clauses read off sampled rate
    curves use ``grid_tol`` (default ``10 * step``).
    """
    if not isinstance(model, (Bernoulli, Markov)):
        raise UnsupportedModel("the verdict needs exact functionals (Bernoulli or Markov)")
    from .pressure import pressure

    grid_tol = 10 * step if grid_tol is None else grid_tol
    gp = measures.gamma_plus(model)
    gm = measures.gamma_minus(model)
    qm1 = float(pressure(model, model, -1.0))
    h = measures.entropy(model)
    htop = measures.h_top_support(model)

    curves = build_rates(model, step=step)
    I_P, I_V, I_R = curves.I_P, curves.I_V, curves.I_R
    both = np.isfinite(I_R.values) | np.isfinite(I_V.values)
    same_mask = np.array_equal(np.isfinite(I_R.values), np.isfinite(I_V.values))
    with np.errstate(invalid="ignore"):
        diff = np.abs(np.where(both & same_mask, I_R.values - I_V.values, 0.0))
    ip_at = I_P.at(-gp)

    a = default_alpha_grid(step).points
    qp = np.asarray(pressure(model, model, a))
    qR, qV = np.maximum(qp, gp), np.maximum(qp, qm1)
    neg = a <= 0

    return ConvexityVerdict(
        IR_convex=is_convex(I_R, tol=grid_tol),
        IR_equals_IV=bool(same_mask and diff.max() <= grid_tol),
        qR_equals_qV=bool(np.max(np.abs(qR - qV)) <= scalar_tol),
        gammaPlus_equals_qPm1=abs(gp - qm1) <= scalar_tol,
        IP_at_minus_gammaPlus_zero=bool(math.isfinite(ip_at) and ip_at <= grid_tol),
        qP_affine_on_negatives=bool(np.max(np.abs(qp[neg] + gp * a[neg])) <= scalar_tol),
        gammaPlus_equals_gammaMinus=abs(gp - gm) <= scalar_tol,
        hP_equals_hTop=abs(h - htop) <= scalar_tol,
        scalar_tol=scalar_tol,
        grid_tol=grid_tol,
    )


__all__ = [
    "rate_IQ",
    "rate_function",
    "rate_at",
    "build_IW",
    "build_IV",
    "build_IR",
    "build_rates",
    "RateCurves",
    "ZeroSet",
    "zero_set",
    "ConvexityVerdict",
    "convexity_verdict",
]
