"""Return, nonoverlapping return and waiting times on concrete words.

All three statistics are first-occurrence searches of a pattern inside a
text, so they share one primitive: the border array (failure function) of
the pattern followed by a linear-time scan.  The word period falls out of
the same array.  On top of these sit exact laws obtained by enumerating
every word of a given length with its marginal weight, and the two
mixture-of-geometric toy laws.

Every statistic takes a ``cap``.  A search that does not succeed within
``cap`` candidate positions returns a censored value instead of looping.
"""

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .core import Bernoulli, Markov, as_indices, enumerate_words
from .errors import InstanceTooLarge, NumericalFailure, UnsupportedModel, WordTooShort
from .measures import WORD_BUDGET, gamma_plus

CHUNK = 1 << 16


# --------------------------------------------------------------------------
# time values


@dataclass(frozen=True)
class CensoredTime:
    """A hitting time, or the statement that it exceeds ``cap``.

    ``value`` is the time itself when ``censored`` is false and the cap
    otherwise.
    """

    value: int
    censored: bool = False

    @classmethod
    def at(cls, raw, cap):
        """Wrap a kernel result, where 0 encodes censoring."""
        return cls(cap, True) if raw == 0 else cls(int(raw))

    def __eq__(self, other):
        if isinstance(other, CensoredTime):
            return self.value == other.value and self.censored == other.censored
        if isinstance(other, (int, np.integer)) and not self.censored:
            return self.value == int(other)
        return NotImplemented

    def __hash__(self):
        return hash((self.value, self.censored))

    def __repr__(self):
        return f"Censored({self.value})" if self.censored else str(self.value)


def Censored(cap):
    return CensoredTime(int(cap), True)


@dataclass(frozen=True)
class DiscreteLaw:
    """Law of a positive integer variable, truncated at ``support_max``.

    ``mass[k-1]`` is the probability of the value ``k``; ``tail`` is the
    mass of everything above ``support_max`` (including infinity).
    """

    mass: np.ndarray
    tail: float

    def __post_init__(self):
        m = np.asarray(self.mass, dtype=np.float64)
        m.setflags(write=False)
        object.__setattr__(self, "mass", m)

    @property
    def support_max(self):
        return len(self.mass)

    def __getitem__(self, k):
        return float(self.mass[k - 1])

    @property
    def cumulative(self):
        return np.cumsum(self.mass)

    def total(self):
        return math.fsum(self.mass) + self.tail

    def to_csv(self, header=()):
        lines = [f"# {h}" for h in header]
        lines.append("k,mass,cumulative")
        for k, (m, c) in enumerate(zip(self.mass, self.cumulative), start=1):
            lines.append(f"{k},{m:.17g},{c:.17g}")
        lines.append(f"tail,{self.tail:.17g},{self.total():.17g}")
        return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# border arrays and matching


@njit(cache=True)
def _failure(pat, fail):
    m = pat.shape[0]
    if m == 0:
        return
    fail[0] = 0
    k = 0
    for i in range(1, m):
        while k > 0 and pat[i] != pat[k]:
            k = fail[k - 1]
        if pat[i] == pat[k]:
            k += 1
        fail[i] = k


@njit(cache=True)
def _first_match(pat, fail, text, lo, hi):
    # smallest start s in [lo, hi] with text[s:s+m] == pat, or -1
    m = pat.shape[0]
    j = 0
    for i in range(lo, hi + m):
        while j > 0 and text[i] != pat[j]:
            j = fail[j - 1]
        if text[i] == pat[j]:
            j += 1
        if j == m:
            return i - m + 1
    return -1


@njit(cache=True)
def _return_time(x, n, cap, fail):
    _failure(x[:n], fail)
    s = _first_match(x[:n], fail, x, 1, cap)
    return s if s >= 0 else 0


@njit(cache=True)
def _nonoverlap_time(x, n, cap, fail):
    _failure(x[:n], fail)
    s = _first_match(x[:n], fail, x, n, n + cap - 1)
    return s - n + 1 if s >= 0 else 0


@njit(cache=True)
def _waiting_time(u, fail, y, cap):
    s = _first_match(u, fail, y, 0, cap - 1)
    return s + 1 if s >= 0 else 0


def failure_function(word, alphabet=None):
    """Border array: entry ``i`` is the longest proper border of ``word[:i+1]``."""
    u = as_indices(word, alphabet)
    fail = np.zeros(u.size, dtype=np.int64)
    _failure(u, fail)
    return fail


def period(word, alphabet=None):
    """Smallest ``p`` with ``u_i = u_{i+p}`` wherever both sides are defined."""
    u = as_indices(word, alphabet)
    if u.size == 0:
        raise WordTooShort("period of the empty word is undefined")
    return int(u.size - failure_function(u)[-1])


def _need(x, length, what):
    if x.size < length:
        raise WordTooShort(f"{what} needs a word of length >= {length}, got {x.size}")


def _check_counts(n, cap):
    if n < 1 or cap < 1:
        raise ValueError("n and cap must be >= 1")


def return_time(x, n, cap, alphabet=None):
    """First ``k <= cap`` at which the prefix ``x_1^n`` reappears at ``x_{k+1}``."""
    _check_counts(n, cap)
    x = as_indices(x, alphabet)
    _need(x, n + cap, "return_time")
    raw = _return_time(x, n, cap, np.zeros(n, dtype=np.int64))
    return CensoredTime.at(raw, cap)


def nonoverlap_return_time(x, n, cap, alphabet=None):
    """First ``k <= cap`` with ``x_{n+k}^{2n+k-1} = x_1^n``."""
    _check_counts(n, cap)
    x = as_indices(x, alphabet)
    _need(x, 2 * n - 1 + cap, "nonoverlap_return_time")
    raw = _nonoverlap_time(x, n, cap, np.zeros(n, dtype=np.int64))
    return CensoredTime.at(raw, cap)


def waiting_time(u, y, cap=None, alphabet=None):
    """First ``k <= cap`` with ``y_k^{k+|u|-1} = u``.

    ``cap`` defaults to the largest value the length of ``y`` allows.
    """
    u = as_indices(u, alphabet)
    y = as_indices(y, alphabet)
    if u.size == 0:
        raise WordTooShort("waiting time of the empty word is undefined")
    if cap is None:
        cap = y.size - u.size + 1
    _check_counts(u.size, cap)
    _need(y, u.size + cap - 1, "waiting_time")
    fail = failure_function(u)
    return CensoredTime.at(_waiting_time(u, fail, y, cap), cap)


# --------------------------------------------------------------------------
# exact laws by enumeration


@njit(cache=True)
def _return_mass(words, weights, n, cap, out, check_period):
    # out[k] accumulates P{R_n = k}; out[0] is the censored mass.
    # With check_period, every k < n is cross-checked against the period
    # of the prefix of length n + k; returns the number of disagreements.
    L = words.shape[1]
    fail = np.zeros(n, dtype=np.int64)
    full = np.zeros(L, dtype=np.int64)
    bad = 0
    for r in range(words.shape[0]):
        x = words[r]
        k = _return_time(x, n, cap, fail)
        out[k] += weights[r]
        if check_period:
            _failure(x, full)
            for j in range(1, min(n, cap + 1)):
                per = n + j - full[n + j - 1]
                if (per == j) != (k == j):
                    bad += 1
    return bad


@njit(cache=True)
def _nonoverlap_mass(words, weights, n, cap, out):
    fail = np.zeros(n, dtype=np.int64)
    for r in range(words.shape[0]):
        out[_nonoverlap_time(words[r], n, cap, fail)] += weights[r]


@njit(cache=True)
def _waiting_mass(us, wu, ys, wy, cap, out):
    n = us.shape[1]
    fail = np.zeros(n, dtype=np.int64)
    for i in range(us.shape[0]):
        if wu[i] == 0.0:
            continue
        _failure(us[i], fail)
        for j in range(ys.shape[0]):
            out[_waiting_time(us[i], fail, ys[j], cap)] += wu[i] * wy[j]


def _guard(count, what):
    if count > WORD_BUDGET:
        raise InstanceTooLarge(f"{what}: {count} weighted words exceed the budget of {WORD_BUDGET}")


def _blocks(model, length):
    """Yield ``(words, weights)`` chunks covering ``A^length`` in order."""
    size = model.alphabet.size
    total = size**length
    powers = size ** np.arange(length - 1, -1, -1, dtype=np.int64)
    for start in range(0, total, CHUNK):
        idx = np.arange(start, min(total, start + CHUNK), dtype=np.int64)
        words = (idx[:, None] // powers[None, :]) % size
        weights = np.exp(model.log_marginals(words))
        keep = weights > 0
        yield np.ascontiguousarray(words[keep]), weights[keep]


def _law(acc, k_max):
    mass = np.clip(acc[1:], 0.0, None)
    tail = max(0.0, 1.0 - math.fsum(mass))
    return DiscreteLaw(mass, tail)


def exact_return_law(model, n, k_max, check_period=True):
    """``P{R_n = k}`` for ``k = 1..k_max`` by enumeration of ``A^{n+k_max}``.

    The event ``{R_n = k}`` only depends on the first ``n + k`` letters, so
    one enumeration at the largest length serves every ``k``.  For ``k < n``
    each word is also classified through the period of its prefix; any
    disagreement raises :class:`NumericalFailure`.
    """
    _check_counts(n, k_max)
    L = n + k_max
    _guard(model.alphabet.size**L, "exact_return_law")
    acc = np.zeros(k_max + 1)
    bad = 0
    for words, weights in _blocks(model, L):
        bad += _return_mass(words, weights, n, k_max, acc, check_period)
    if bad:
        raise NumericalFailure(f"period identity violated on {bad} word/shift pairs")
    return _law(acc, k_max)


def exact_nonoverlap_law(model, n, k_max):
    """``P{V_n = k}`` for ``k = 1..k_max`` by enumeration of ``A^{2n-1+k_max}``."""
    _check_counts(n, k_max)
    L = 2 * n - 1 + k_max
    _guard(model.alphabet.size**L, "exact_nonoverlap_law")
    acc = np.zeros(k_max + 1)
    for words, weights in _blocks(model, L):
        _nonoverlap_mass(words, weights, n, k_max, acc)
    return _law(acc, k_max)


def exact_waiting_law(p, q, n, k_max):
    """``(P x Q){W_n = k}`` for ``k = 1..k_max``.

    Pattern words ``u`` range over ``A^n`` with weight ``P_n(u)``; texts over
    ``A^{n+k_max-1}`` with their ``Q`` weight.
    """
    p.check_alphabet(q)
    _check_counts(n, k_max)
    size = p.alphabet.size
    L = n + k_max - 1
    _guard(size**n * size**L, "exact_waiting_law")
    us = enumerate_words(size, n)
    wu = np.exp(p.log_marginals(us))
    acc = np.zeros(k_max + 1)
    for ys, wy in _blocks(q, L):
        _waiting_mass(us, wu, ys, wy, k_max, acc)
    return _law(acc, k_max)


# --------------------------------------------------------------------------
# toy laws


def _pair_marginals(p, q, n):
    p.check_alphabet(q)
    size = p.alphabet.size
    _guard(size**n, "toy law")
    words = enumerate_words(size, n)
    lp = p.log_marginals(words)
    lq = lp if q is p else q.log_marginals(words)
    keep = np.isfinite(lp) & np.isfinite(lq)
    return lp[keep], lq[keep]


def toy_nu(p, q, n, k):
    """Mixture of geometric laws ``sum_u P_n(u) Q_n(u) (1 - Q_n(u))^(k-1)``.

    ``k`` may be an integer or an array of integers ``>= 1``.
    """
    k = np.asarray(k)
    if np.any(k < 1):
        raise ValueError("k must be >= 1")
    lp, lq = _pair_marginals(p, q, n)
    qn = np.exp(lq)
    with np.errstate(divide="ignore"):
        log_miss = np.log1p(-qn)
    km1 = np.atleast_1d(k).astype(np.float64)[:, None] - 1.0
    with np.errstate(invalid="ignore"):  # 0 * -inf when Q_n(u) = 1
        geo = np.where(km1 == 0, 0.0, km1 * log_miss[None, :])
    vals = np.exp(lp + lq + geo).sum(axis=1)
    return float(vals[0]) if k.ndim == 0 else vals


def toy_rho(p, n, k):
    """``e^{n gamma_+}`` atom at ``k = 1`` mixed with ``nu_n`` taken at ``Q = P``."""
    if not isinstance(p, (Bernoulli, Markov)):
        raise UnsupportedModel("toy_rho needs an exact gamma_plus (Bernoulli or Markov)")
    k = np.asarray(k)
    atom = math.exp(n * gamma_plus(p))
    nu = toy_nu(p, p, n, k)
    out = atom * (k == 1) + (1.0 - atom) * nu
    return float(out) if k.ndim == 0 else out


__all__ = [
    "CensoredTime",
    "Censored",
    "DiscreteLaw",
    "failure_function",
    "period",
    "return_time",
    "nonoverlap_return_time",
    "waiting_time",
    "exact_return_law",
    "exact_nonoverlap_law",
    "exact_waiting_law",
    "toy_nu",
    "toy_rho",
]
