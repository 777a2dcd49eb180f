"""Independent reference implementations used as test oracles.

Plain Python loops over explicit words and hidden paths; nothing here
shares code with the package under test.
"""

import itertools
import math

import numpy as np


def words(size, n):
    return list(itertools.product(range(size), repeat=n))


def word_prob(model, w):
    """Probability of a word by summing over every hidden path."""
    w = tuple(w)
    if not w:
        return 1.0
    init, trans, emit = np.asarray(model.init), np.asarray(model.trans), np.asarray(model.emit)
    # only hidden paths that emit the word contribute
    choices = [np.flatnonzero(emit == a) for a in w]
    total = 0.0
    for path in itertools.product(*choices):
        pr = init[path[0]]
        for a, b in zip(path, path[1:]):
            pr *= trans[a, b]
        total += pr
    return total


def naive_period(u):
    n = len(u)
    for p in range(1, n + 1):
        if all(u[i] == u[i + p] for i in range(n - p)):
            return p
    return n


def naive_return(x, n, cap):
    for k in range(1, cap + 1):
        if tuple(x[k:k + n]) == tuple(x[:n]):
            return k
    return 0


def naive_nonoverlap(x, n, cap):
    for k in range(1, cap + 1):
        s = n + k - 1
        if tuple(x[s:s + n]) == tuple(x[:n]):
            return k
    return 0


def naive_waiting(u, y, cap):
    n = len(u)
    for k in range(1, cap + 1):
        if tuple(y[k - 1:k - 1 + n]) == tuple(u):
            return k
    return 0


def brute_law(model, n, k_max, kind):
    """``P{T = k}`` for ``k = 1..k_max`` with ``T`` in ``{"R", "V"}`` by listing words."""
    L = n + k_max if kind == "R" else 2 * n - 1 + k_max
    scan = naive_return if kind == "R" else naive_nonoverlap
    out = np.zeros(k_max)
    for w in words(model.alphabet.size, L):
        pr = word_prob(model, w)
        if pr == 0:
            continue
        k = scan(w, n, k_max)
        if k:
            out[k - 1] += pr
    return out


def brute_waiting_law(p, q, n, k_max):
    size = p.alphabet.size
    out = np.zeros(k_max)
    texts = [(y, word_prob(q, y)) for y in words(size, n + k_max - 1)]
    for u in words(size, n):
        pu = word_prob(p, u)
        if pu == 0:
            continue
        for y, py in texts:
            k = naive_waiting(u, y, k_max)
            if k:
                out[k - 1] += pu * py
    return out


def brute_finite_pressure(p, q, alpha, n):
    total = 0.0
    for w in words(p.alphabet.size, n):
        pp, qq = word_prob(p, w), word_prob(q, w)
        if pp > 0:
            total += pp * qq ** (-alpha) if qq > 0 else math.inf
    return math.log(total) / n


def spectral_pressure(P, Q, alpha):
    """``ln spr(P_ij Q_ij^-alpha)`` from numpy eigenvalues."""
    P, Q = np.asarray(P, float), np.asarray(Q, float)
    with np.errstate(divide="ignore"):
        M = np.where(P > 0, P * np.where(Q > 0, Q, np.nan) ** (-alpha), 0.0)
    return math.log(max(abs(np.linalg.eigvals(M))))


def dense_conjugate(func, xs, duals):
    """``sup_x (a x - func(x))`` over a dense sample ``xs`` for each ``a``."""
    fx = np.array([func(x) for x in xs])
    return np.array([np.max(a * xs - fx) for a in duals])


def bisect(f, lo, hi, tol=1e-13):
    flo = f(lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)
