"""Monte Carlo estimation of return and waiting time statistics.

Each sample owns a counter-based stream, so sample ``i`` is a pure function
of ``(seed, statistic, i)`` and the result does not depend on thread count
or evaluation order.  Trajectories are generated symbol by symbol inside
the matching loop; nothing of length ``cap`` is ever stored.  A time that
is not observed within ``cap`` candidate positions is recorded as ``0``
(censored).

The thread count of the compiled kernels follows ``RECUR_LDP_THREADS``.
"""

import math
import os
import warnings
from dataclasses import dataclass, field

import numba
import numpy as np
from numba import njit, prange
from scipy import stats

from . import _rng
from .core import Stream
from .errors import AllZeroCounts, CapTooSmall
from .recurrence import _failure

STATISTICS = ("R", "V", "W")
MAX_CAP = 10**7
DEFAULT_EPS = 0.1
DEFAULT_M = 10**5
MIN_COUNT = 20
WILSON_BELOW = 30
Z95 = 1.959963984540054
CENSOR_WEIGHT = 1e-6

# disjoint stream namespaces per statistic
_NS_SHIFT = 40
_NS = {"R": 1, "V": 2, "W": 3, "W_text": 4}


# an outdated system TBB only means numba falls back to another layer
warnings.filterwarnings("ignore", message="The TBB threading layer")


def _configure_threads():
    raw = os.environ.get("RECUR_LDP_THREADS")
    if raw:
        try:
            numba.set_num_threads(max(1, min(int(raw), numba.config.NUMBA_NUM_THREADS)))
        except ValueError:
            pass


_configure_threads()


def _stream_base(name):
    return _NS[name] << _NS_SHIFT


# --------------------------------------------------------------------------
# kernels


@njit(cache=True)
def _start(init_cdf, trans_cdf, emit, key, n, pat):
    h = _rng.draw(init_cdf[0], _rng.uniform(key, 0))
    pat[0] = emit[h]
    for t in range(1, n):
        h = _rng.draw(trans_cdf[h], _rng.uniform(key, t))
        pat[t] = emit[h]
    return h


@njit(cache=True, parallel=True)
def _mc_return(init_cdf, trans_cdf, emit, seed, base, M, n, cap, overlap, out):
    # overlap: R_n (scan from x_2); otherwise V_n (scan from x_{n+1})
    for i in prange(M):
        key = _rng.stream_key(seed, base + i)
        pat = np.empty(n, np.int64)
        fail = np.empty(n, np.int64)
        h = _start(init_cdf, trans_cdf, emit, key, n, pat)
        _failure(pat, fail)
        lo = 1 if overlap else n
        stop = lo + cap + n - 1
        j = 0
        res = 0
        for t in range(lo, stop):
            if t < n:
                c = pat[t]
            else:
                h = _rng.draw(trans_cdf[h], _rng.uniform(key, t))
                c = emit[h]
            while j > 0 and c != pat[j]:
                j = fail[j - 1]
            if c == pat[j]:
                j += 1
            if j == n:
                res = t - n + 1 - lo + 1
                break
        out[i] = res


@njit(cache=True, parallel=True)
def _mc_waiting(p_init, p_trans, p_emit, q_init, q_trans, q_emit, seed, base_u, base_y, M, n, cap, out):
    for i in prange(M):
        ku = _rng.stream_key(seed, base_u + i)
        ky = _rng.stream_key(seed, base_y + i)
        pat = np.empty(n, np.int64)
        fail = np.empty(n, np.int64)
        _start(p_init, p_trans, p_emit, ku, n, pat)
        _failure(pat, fail)
        h = 0
        j = 0
        res = 0
        for t in range(cap + n - 1):
            if t == 0:
                h = _rng.draw(q_init[0], _rng.uniform(ky, 0))
            else:
                h = _rng.draw(q_trans[h], _rng.uniform(ky, t))
            c = q_emit[h]
            while j > 0 and c != pat[j]:
                j = fail[j - 1]
            if c == pat[j]:
                j += 1
            if j == n:
                res = t - n + 2
                break
        out[i] = res


def sample_prefix(model, length, stream_id=0, seed=0):
    """Word of the given length drawn from ``model`` on stream ``(seed, stream_id)``."""
    return model.sample_prefix(length, Stream(seed, stream_id))


def sample_times(p, statistic, n, M, cap, seed=0, q=None):
    """``M`` independent draws of ``R_n``, ``V_n`` or ``W_n`` (``0`` = censored).

    For ``W`` the pattern comes from ``p`` and the text from ``q``
    (default ``p``) on a separate stream.
    """
    if statistic not in STATISTICS:
        raise ValueError(f"statistic must be one of {STATISTICS}")
    if n < 1:
        raise ValueError("n must be >= 1")
    if cap < 1:
        raise CapTooSmall("cap must be >= 1")
    out = np.zeros(int(M), dtype=np.int64)
    if M == 0:
        return out
    if statistic == "W":
        q = p if q is None else q
        p.check_alphabet(q)
        _mc_waiting(p._init_cdf, p._trans_cdf, p.emit, q._init_cdf, q._trans_cdf, q.emit,
                    np.uint64(seed), np.uint64(_stream_base("W")), np.uint64(_stream_base("W_text")),
                    int(M), int(n), int(cap), out)
    else:
        _mc_return(p._init_cdf, p._trans_cdf, p.emit, np.uint64(seed), np.uint64(_stream_base(statistic)),
                   int(M), int(n), int(cap), statistic == "R", out)
    return out


def sample_trajectory(p, statistic, index, length, seed=0):
    """The trajectory the kernel uses for sample ``index`` (``R``/``V``; ``W`` pattern)."""
    name = "W" if statistic == "W" else statistic
    return p.sample_prefix(length, Stream(seed, _stream_base(name) + index))


# --------------------------------------------------------------------------
# binomial helpers


def wilson_interval(count, M, z=Z95):
    if M == 0:
        return 0.0, 1.0
    p = count / M
    denom = 1 + z * z / M
    centre = (p + z * z / (2 * M)) / denom
    half = z * math.sqrt(p * (1 - p) / M + z * z / (4 * M * M)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def _rate_se(count, M, n):
    """Standard error of ``-(1/n) ln(count/M)``."""
    if count == 0:
        return math.inf
    p = count / M
    if count < WILSON_BELOW:
        lo, hi = wilson_interval(count, M)
        lo = max(lo, 1e-300)
        return (math.log(hi) - math.log(lo)) / (2 * Z95 * n)
    return math.sqrt((1 - p) / (M * p)) / n


# --------------------------------------------------------------------------
# empirical law


@dataclass
class EmpiricalLaw:
    """Counts of ``T = k`` for ``k = 1..cap`` plus the censored count."""

    counts: np.ndarray
    censored: int
    M: int

    @property
    def frequency(self):
        return self.counts / self.M

    @property
    def sigma(self):
        p = self.frequency
        return np.sqrt(p * (1 - p) / self.M)


def empirical_law(p, statistic, n, M, cap, seed=0, q=None):
    t = sample_times(p, statistic, n, M, cap, seed, q)
    counts = np.bincount(t, minlength=cap + 1)
    return EmpiricalLaw(counts[1:].astype(np.int64), int(counts[0]), int(M))


# --------------------------------------------------------------------------
# empirical rates


@dataclass
class EmpiricalLdp:
    """Band counts of ``(1/n) ln T`` and the implied empirical rates."""

    statistic: str
    n_values: list
    epsilon: float
    centers: np.ndarray
    counts: np.ndarray
    M: int
    caps: list
    censored: np.ndarray
    out_of_band: np.ndarray
    rates: np.ndarray
    se: np.ndarray
    sparse: np.ndarray
    top_includes_censored: np.ndarray
    seed: int = 0

    @property
    def censor_fraction(self):
        return self.censored / self.M if self.M else np.zeros(len(self.n_values))

    def to_csv(self, header=()):
        lines = [f"# {h}" for h in header]
        lines.append(f"# statistic={self.statistic} seed={self.seed} M={self.M} eps={self.epsilon} "
                     f"caps={'|'.join(str(c) for c in self.caps)}")
        lines.append("n,s,count,rate,se,sparse,censored_in_band,censor_fraction")
        for i, n in enumerate(self.n_values):
            for j, c in enumerate(self.centers):
                r = self.rates[i, j]
                lines.append(
                    f"{n},{c:.10g},{self.counts[i, j]},{'nan' if math.isnan(r) else format(r, '.12g')},"
                    f"{self.se[i, j]:.6g},{int(self.sparse[i, j])},"
                    f"{int(self.top_includes_censored[i] and j == len(self.centers) - 1)},"
                    f"{self.censor_fraction[i]:.12g}"
                )
        return "\n".join(lines) + "\n"


def default_centers(s_max, epsilon=DEFAULT_EPS):
    """Band centres ``0, 2eps, 4eps, ...`` tiling ``[-eps, s_max + eps)``."""
    count = int(math.floor(s_max / (2 * epsilon) + 1e-9)) + 1
    return 2 * epsilon * np.arange(count)


def default_cap(n, top_center, epsilon=DEFAULT_EPS):
    """Largest ``T`` with ``(1/n) ln T`` still inside the top band, bounded by ``MAX_CAP``.

    With this cap every uncensored sample lands in some band.
    """
    edge = math.exp(n * (top_center + epsilon))
    return int(min(MAX_CAP, math.ceil(edge) - 1))


def empirical_rate(p, statistic, n_values, centers=None, epsilon=DEFAULT_EPS, M=DEFAULT_M,
                   cap=None, seed=0, q=None, s_max=None):
    """Empirical rates ``-(1/n) ln #{(1/n) ln T in [c-eps, c+eps)} / M``.

    Band centres must be at least ``2*eps`` apart so bands are disjoint.
    Censored samples are counted separately; the rate of the top band is
    computed with the censored mass added (flagged in the output).  Rates
    with fewer than ``MIN_COUNT`` hits are reported as NaN and flagged
    sparse.

    Raises
    ------
    CapTooSmall
        If ``cap < e^{n s_max}`` for some ``n``.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    if centers is None:
        if s_max is None:
            raise ValueError("give band centres or s_max")
        centers = default_centers(s_max, epsilon)
    centers = np.sort(np.asarray(centers, dtype=np.float64))
    if centers.size > 1 and np.min(np.diff(centers)) < 2 * epsilon - 1e-12:
        raise ValueError("band centres closer than 2*eps overlap")
    s_top = float(centers[-1])
    n_values = [int(n) for n in n_values]
    shape = (len(n_values), centers.size)
    counts = np.zeros(shape, dtype=np.int64)
    rates = np.full(shape, np.nan)
    se = np.full(shape, np.inf)
    sparse = np.ones(shape, bool)
    censored = np.zeros(len(n_values), dtype=np.int64)
    outside = np.zeros(len(n_values), dtype=np.int64)
    caps = []
    for i, n in enumerate(n_values):
        c = cap if cap is not None else default_cap(n, s_top, epsilon)
        if c < math.exp(n * s_top) * (1 - 1e-12):
            raise CapTooSmall(f"cap={c} < e^(n s_max) for n={n}")
        caps.append(int(c))
        t = sample_times(p, statistic, n, M, c, seed, q)
        hit = t > 0
        censored[i] = M - hit.sum()
        s = np.log(t[hit]) / n
        band = np.floor((s - centers[0] + epsilon) / (2 * epsilon)).astype(np.int64)
        # non-uniform centres: fall back to an explicit search
        if centers.size > 1 and not np.allclose(np.diff(centers), 2 * epsilon):
            band = np.searchsorted(centers + epsilon, s, side="right")
            ok = (band < centers.size)
            ok[ok] &= s[ok] >= centers[band[ok]] - epsilon
        else:
            ok = (band >= 0) & (band < centers.size)
        counts[i] = np.bincount(band[ok], minlength=centers.size)[: centers.size]
        outside[i] = hit.sum() - ok.sum()
        for j in range(centers.size):
            k = counts[i, j] + (censored[i] if j == centers.size - 1 else 0)
            if k >= MIN_COUNT:
                rates[i, j] = -math.log(k / M) / n
                se[i, j] = _rate_se(k, M, n)
                sparse[i, j] = False
    return EmpiricalLdp(statistic, n_values, float(epsilon), centers, counts, int(M), caps, censored,
                        outside, rates, se, sparse, censored > 0, int(seed))


# --------------------------------------------------------------------------
# tail slope


@dataclass
class SlopeFit:
    """Least-squares line through ``(n, ln p_hat(n))``."""

    n_values: list
    log_p: np.ndarray
    counts: np.ndarray
    M: int
    slope: float
    intercept: float
    residual: float
    stderr: float
    seed: int = 0

    def to_csv(self, header=()):
        lines = [f"# {h}" for h in header]
        lines.append(f"# event=R_less_n seed={self.seed} M={self.M} slope={self.slope:.12g} "
                     f"intercept={self.intercept:.12g} stderr={self.stderr:.6g} residual={self.residual:.6g}")
        lines.append("n,count,p_hat,log_p")
        for n, c, lp in zip(self.n_values, self.counts, self.log_p):
            lines.append(f"{n},{c},{c / self.M:.12g},{lp:.12g}")
        return "\n".join(lines) + "\n"


def tail_slope(p, n_values, M=10**6, seed=0, event="R_less_n"):
    """Slope of ``ln P{R_n < n}`` against ``n``.

    ``R_n < n`` only needs ``cap = n - 1``.

    Raises
    ------
    AllZeroCounts
        If the event is never observed for some ``n``; ``upper_bound``
        carries the rule-of-three bound ``3/M``.
    """
    if event != "R_less_n":
        raise ValueError("only the R_less_n event is supported")
    n_values = [int(n) for n in n_values]
    if len(n_values) < 4:
        raise ValueError("a slope fit needs at least four n values")
    if min(n_values) < 2:
        raise ValueError("R_n < n needs n >= 2")
    counts = np.array([np.count_nonzero(sample_times(p, "R", n, M, n - 1, seed)) for n in n_values])
    if np.any(counts == 0):
        raise AllZeroCounts("event R_n < n never observed", upper_bound=3.0 / M)
    log_p = np.log(counts / M)
    x = np.asarray(n_values, dtype=np.float64)
    if np.ptp(log_p) == 0:
        slope, intercept, stderr = 0.0, float(log_p[0]), 0.0
    else:
        fit = stats.linregress(x, log_p)
        slope, intercept, stderr = float(fit.slope), float(fit.intercept), float(fit.stderr)
    resid = float(np.sum((log_p - (slope * x + intercept)) ** 2))
    return SlopeFit(n_values, log_p, counts, int(M), slope, intercept, resid, stderr, int(seed))


# --------------------------------------------------------------------------
# empirical pressure


@dataclass
class PressureEstimate:
    """``(1/n) ln mean(T^alpha)`` with a delta-method interval.

    Censored samples enter as ``cap^alpha``.  For ``alpha < 0`` their true
    contribution lies in ``(0, cap^alpha]``, and ``bias_bound`` is the
    resulting largest possible downward shift of the estimate; for
    ``alpha > 0`` the estimate is a lower bound whenever censoring occurred.
    """

    value: float
    se: float
    ci: tuple
    censored_fraction: float
    bias_bound: float
    lower_bound_only: bool
    alpha: float
    n: int
    M: int
    cap: int
    seed: int = 0


def default_pressure_cap(n, alpha):
    """``MAX_CAP`` for ``alpha >= 0``; for ``alpha < 0`` the smallest cap with ``cap^alpha <= CENSOR_WEIGHT``."""
    if alpha >= 0:
        return MAX_CAP
    return int(min(MAX_CAP, max(n, math.ceil(CENSOR_WEIGHT ** (1.0 / alpha)))))


def empirical_pressure(p, statistic, alpha, n, M=DEFAULT_M, cap=None, seed=0, q=None):
    """Empirical pressure of ``R_n``, ``V_n`` or ``W_n`` at ``alpha``.

    ``cap`` defaults to :func:`default_pressure_cap`: for negative ``alpha``
    a censored sample then moves the mean by at most ``CENSOR_WEIGHT``.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    cap = default_pressure_cap(n, alpha) if cap is None else int(cap)
    if cap < n:
        raise CapTooSmall(f"cap={cap} cannot resolve times up to n={n}")
    if alpha == 0:
        return PressureEstimate(0.0, 0.0, (0.0, 0.0), 0.0, 0.0, False, 0.0, n, int(M), cap, int(seed))
    t = sample_times(p, statistic, n, M, cap, seed, q)
    cens = t == 0
    vals = np.where(cens, float(cap), t.astype(np.float64)) ** alpha
    mean = float(vals.mean())
    sd = float(vals.std(ddof=1)) if M > 1 else 0.0
    value = math.log(mean) / n
    se = sd / math.sqrt(M) / mean / n
    frac = float(cens.mean())
    bias = 0.0
    if alpha < 0 and frac > 0:
        rest = mean - frac * cap**alpha
        bias = (value - math.log(rest) / n) if rest > 0 else math.inf
    return PressureEstimate(value, se, (value - Z95 * se, value + Z95 * se), frac, bias,
                            bool(alpha > 0 and frac > 0), float(alpha), int(n), int(M), cap, int(seed))


# --------------------------------------------------------------------------
# W versus V law test


@dataclass
class LawTest:
    statistic: float
    p_value: float
    dof: int
    bins: list = field(default_factory=list)
    table: np.ndarray = None


def _merge_bins(table, min_expected=5.0):
    cols = [table[:, j].copy() for j in range(table.shape[1])]
    edges = list(range(table.shape[1]))
    merged = True
    while merged and len(cols) > 1:
        merged = False
        tab = np.stack(cols, axis=1)
        expected = tab.sum(axis=1, keepdims=True) * tab.sum(axis=0, keepdims=True) / tab.sum()
        j = int(np.argmin(expected.min(axis=0)))
        if expected[:, j].min() < min_expected:
            k = j + 1 if j + 1 < len(cols) else j - 1
            lo, hi = min(j, k), max(j, k)
            cols[lo] = cols[lo] + cols[hi]
            del cols[hi]
            del edges[hi]
            merged = True
    return np.stack(cols, axis=1), edges


def law_equality_test(p, n, M=DEFAULT_M, cap=None, seed=0, bins=20):
    """Chi-square two-sample test of ``W_n`` (with ``Q = P``) against ``V_n``.

    Bins come from pooled quantiles; censored samples form their own bin.
    Bins with expected count below 5 are merged into a neighbour.  Only the
    test report is returned; what to conclude is left to the caller.
    """
    cap = MAX_CAP if cap is None else int(cap)
    w = sample_times(p, "W", n, M, cap, seed)
    v = sample_times(p, "V", n, M, cap, seed)
    pooled = np.concatenate([w[w > 0], v[v > 0]])
    if pooled.size == 0:
        return LawTest(0.0, 1.0, 0, [], None)
    edges = np.unique(np.quantile(pooled, np.linspace(0, 1, bins + 1)[1:-1], method="lower"))

    def binned(x):
        idx = np.where(x > 0, np.searchsorted(edges, x, side="left"), edges.size + 1)
        return np.bincount(idx, minlength=edges.size + 2)

    table = np.stack([binned(w), binned(v)]).astype(np.float64)
    table = table[:, table.sum(axis=0) > 0]
    table, kept = _merge_bins(table)
    if table.shape[1] < 2:
        return LawTest(0.0, 1.0, 0, kept, table)
    chi2, pval, dof, _ = stats.chi2_contingency(table, correction=False)
    return LawTest(float(chi2), float(pval), int(dof), kept, table)


__all__ = [
    "sample_prefix",
    "sample_times",
    "sample_trajectory",
    "empirical_law",
    "EmpiricalLaw",
    "empirical_rate",
    "EmpiricalLdp",
    "default_centers",
    "default_cap",
    "tail_slope",
    "SlopeFit",
    "empirical_pressure",
    "PressureEstimate",
    "default_pressure_cap",
    "law_equality_test",
    "LawTest",
    "wilson_interval",
]
