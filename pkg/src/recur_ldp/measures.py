"""Scalar functionals of a measure model.

Entropies, cross entropies, the extremal per-letter log-probabilities
``gamma_plus``/``gamma_minus`` and the topological entropy of the support.
For Bernoulli and Markov models these are exact.  Hidden Markov models have
no closed forms; their values are finite-``n`` proxies and every function
reports that through ``full_output=True``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .core import Bernoulli, Markov, enumerate_words
from .errors import AlphabetMismatch, InstanceTooLarge, NoCycle

DEFAULT_HMM_N = 10
WORD_BUDGET = 2 * 10**7


@dataclass(frozen=True)
class CycleResult:
    """Optimal simple cycle of a weighted digraph and its mean weight."""

    value: float
    cycle: list = field(default_factory=list)

    @property
    def length(self):
        return len(self.cycle)


def _finite_weights(weights):
    W = np.array(weights, dtype=np.float64)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValueError("weights must be a square matrix")
    W[np.isnan(W)] = -np.inf
    return W


def _karp_value(W):
    """Maximum cycle mean by Karp's recurrence from a virtual source."""
    n = W.shape[0]
    D = np.full((n + 1, n), -np.inf)
    D[0] = 0.0
    for k in range(1, n + 1):
        D[k] = np.max(D[k - 1][:, None] + W, axis=0)
    best = -np.inf
    for v in range(n):
        if D[n, v] == -np.inf:
            continue
        ks = np.flatnonzero(D[:n, v] > -np.inf)
        worst = np.min((D[n, v] - D[ks, v]) / (n - ks))
        best = max(best, worst)
    return best


def _maxplus(A, B):
    return np.max(A[:, :, None] + B[None, :, :], axis=1)


def max_mean_cycle(weights):
    """Simple cycle of maximal mean weight.

    Edges carrying ``-inf`` (or NaN) are absent.  The optimum value comes
    from Karp's dynamic programme; the cycle is then extracted as the
    shortest closed walk attaining that mean, which is necessarily simple.
    Ties are broken by length first and then by the lexicographically
    smallest state sequence, written from its smallest state.

    Raises
    ------
    NoCycle
        If the graph of finite-weight edges is acyclic.
    """
    W = _finite_weights(weights)
    n = W.shape[0]
    lam = _karp_value(W)
    if lam == -np.inf:
        raise NoCycle("no cycle with finite weights")
    finite = W[np.isfinite(W)]
    tol = 1e-10 * (1.0 + np.abs(finite).max())
    Wr = W - lam

    # shortest length L admitting an optimal closed walk
    power = Wr.copy()
    for L in range(1, n + 1):
        diag = np.diag(power)
        starts = np.flatnonzero(diag >= -tol * L)
        if starts.size:
            break
        power = _maxplus(power, Wr)
    else:  # pragma: no cover - Karp guarantees a cycle of length <= n
        raise NoCycle("cycle extraction failed")
    v = int(starts[0])

    # back[r][w]: best reduced weight of a length-r path from w to v
    back = np.full((L + 1, n), -np.inf)
    back[0, v] = 0.0
    for r in range(1, L + 1):
        back[r] = np.max(Wr + back[r - 1][None, :], axis=1)
    cycle = [v]
    cur, acc = v, 0.0
    for step in range(1, L):
        for x in range(n):
            if x == v or x in cycle:
                continue
            if acc + Wr[cur, x] + back[L - step, x] >= -tol * L:
                acc += Wr[cur, x]
                cycle.append(x)
                cur = x
                break
    value = float(np.mean([W[cycle[i], cycle[(i + 1) % L]] for i in range(L)]))
    return CycleResult(value, cycle)


def enumerate_simple_cycles(weights):
    """Every simple cycle with finite weights, as ``CycleResult`` objects.

    Brute force over ordered state subsets; intended for small graphs and
    as an oracle for :func:`max_mean_cycle`.
    """
    from itertools import permutations

    W = _finite_weights(weights)
    n = W.shape[0]
    out = []
    for L in range(1, n + 1):
        for perm in permutations(range(n), L):
            if perm[0] != min(perm):
                continue
            ws = [W[perm[i], perm[(i + 1) % L]] for i in range(L)]
            if all(np.isfinite(ws)):
                out.append(CycleResult(float(np.mean(ws)), list(perm)))
    return out


def _log_weights(P):
    with np.errstate(divide="ignore"):
        return np.where(P > 0, np.log(P), -np.inf)


def _hmm_extremes(model, n):
    size = model.alphabet.size
    if size**n > WORD_BUDGET:
        raise InstanceTooLarge(f"{size}^{n} words exceed the enumeration budget")
    logp = model.log_marginals(enumerate_words(size, n))
    finite = logp[np.isfinite(logp)]
    return finite.max() / n, finite.min() / n, finite.size


def _result(value, full_output, **info):
    if full_output:
        info.setdefault("approximate", False)
        info.setdefault("n", None)
        return value, info
    return value


def gamma_plus(model, n=DEFAULT_HMM_N, full_output=False):
    """Largest per-letter log-probability rate ``lim (1/n) max_u ln P_n(u)``.

    Bernoulli: log of the largest letter probability.  Markov: maximal mean
    cycle of the log transition weights.  Hidden Markov: the finite-``n``
    value at the given ``n``, flagged approximate.
    """
    if isinstance(model, Bernoulli):
        return _result(float(np.log(model.probs.max())), full_output,
                       cycle=[int(np.argmax(model.probs))])
    if isinstance(model, Markov):
        res = max_mean_cycle(_log_weights(model.P))
        return _result(res.value, full_output, cycle=res.cycle)
    hi, _, _ = _hmm_extremes(model, n)
    return _result(float(hi), full_output, approximate=True, n=n)


def gamma_minus(model, n=DEFAULT_HMM_N, full_output=False):
    """Smallest per-letter log-probability rate over the support.

    For hidden Markov models the finite-``n`` infima for ``n/2..n`` are
    inspected; a sequence still dropping by a roughly constant amount per
    step is reported as ``-inf`` (``diverging`` in the info dict).
    """
    if isinstance(model, Bernoulli):
        return _result(float(np.log(model.probs[model.probs > 0].min())), full_output)
    if isinstance(model, Markov):
        W = _log_weights(model.P)
        res = max_mean_cycle(np.where(np.isfinite(W), -W, -np.inf))
        return _result(-res.value, full_output, cycle=res.cycle)
    ms = list(range(max(1, n // 2), n + 1))
    lows = np.array([_hmm_extremes(model, m)[1] for m in ms])
    steps = np.diff(lows)
    diverging = steps.size >= 3 and bool(np.all(steps[-3:] < -1e-3)) and (
        np.ptp(steps[-3:]) < 0.5 * abs(steps[-3:].mean())
    )
    value = -math.inf if diverging else float(lows[-1])
    return _result(value, full_output, approximate=True, n=n, diverging=diverging, sequence=lows.tolist())


def _block_entropy(model, n):
    size = model.alphabet.size
    if size**n > WORD_BUDGET:
        raise InstanceTooLarge(f"{size}^{n} words exceed the enumeration budget")
    logp = model.log_marginals(enumerate_words(size, n))
    p = np.exp(logp)
    return float(-np.sum(p[p > 0] * logp[p > 0]))


def entropy(model, n=DEFAULT_HMM_N, full_output=False):
    """Kolmogorov-Sinai entropy rate ``h(P)`` (nats per letter)."""
    if isinstance(model, Bernoulli):
        p = model.probs[model.probs > 0]
        return _result(float(-np.sum(p * np.log(p))), full_output)
    if isinstance(model, Markov):
        P = model.P
        plogp = np.where(P > 0, P * np.log(np.where(P > 0, P, 1.0)), 0.0)
        return _result(float(-np.sum(model.pi[:, None] * plogp)), full_output)
    value = _block_entropy(model, n + 1) - _block_entropy(model, n)
    return _result(value, full_output, approximate=True, n=n)


def cross_entropy(p, q, n=DEFAULT_HMM_N, full_output=False):
    """Specific cross entropy ``h_c(P|Q)``; ``inf`` when ``P`` charges words ``Q`` does not."""
    if p.alphabet != q.alphabet:
        raise AlphabetMismatch("cross entropy needs a shared alphabet")
    if isinstance(p, Bernoulli) and isinstance(q, Bernoulli):
        mask = p.probs > 0
        if np.any(q.probs[mask] == 0):
            return _result(math.inf, full_output)
        return _result(float(-np.sum(p.probs[mask] * np.log(q.probs[mask]))), full_output)
    if isinstance(p, (Bernoulli, Markov)) and isinstance(q, (Bernoulli, Markov)):
        pm, qm = p.as_markov(), q.as_markov()
        mask = pm.P > 0
        if np.any(qm.P[mask] == 0):
            return _result(math.inf, full_output)
        weights = pm.pi[:, None] * pm.P
        return _result(float(-np.sum(weights[mask] * np.log(qm.P[mask]))), full_output)

    size = p.alphabet.size
    if size ** (n + 1) > WORD_BUDGET:
        raise InstanceTooLarge(f"{size}^{n + 1} words exceed the enumeration budget")

    def block(m):
        words = enumerate_words(size, m)
        lp, lq = p.log_marginals(words), q.log_marginals(words)
        mask = np.isfinite(lp)
        if np.any(~np.isfinite(lq[mask])):
            return math.inf
        return float(-np.sum(np.exp(lp[mask]) * lq[mask]))

    hi, lo = block(n + 1), block(n)
    value = math.inf if math.isinf(hi) or math.isinf(lo) else hi - lo
    return _result(value, full_output, approximate=True, n=n)


def h_top_support(model, n=DEFAULT_HMM_N, full_output=False):
    """Topological entropy of the support subshift."""
    if isinstance(model, Bernoulli):
        return _result(float(np.log(np.count_nonzero(model.probs))), full_output)
    if isinstance(model, Markov):
        adj = (model.P > 0).astype(np.float64)
        rho = float(np.max(np.abs(np.linalg.eigvals(adj))))
        return _result(math.log(rho), full_output)
    _, _, count = _hmm_extremes(model, n)
    return _result(math.log(count) / n, full_output, approximate=True, n=n)


def parry_chain(alphabet, adjacency):
    """Measure of maximal entropy of the subshift of finite type with the given 0/1 adjacency.

    ``P_ij = A_ij v_j / (lambda v_i)`` with ``(lambda, v)`` the Perron pair
    of ``A``.
    """
    A = (np.asarray(adjacency, dtype=np.float64) > 0).astype(np.float64)
    vals, vecs = np.linalg.eig(A)
    top = int(np.argmax(vals.real))
    lam = float(vals[top].real)
    v = np.abs(vecs[:, top].real)
    rows = A * v[None, :] / (lam * v[:, None])
    rows /= rows.sum(axis=1, keepdims=True)
    return Markov(alphabet, rows)


def support_rate_interval(p, q=None, n=DEFAULT_HMM_N):
    """Range of ``-(1/n) ln Q_n`` along ``P``-typical words, in the limit.

    With ``q`` omitted this is ``[-gamma_plus, -gamma_minus]``.  For a pair
    it is the range of mean ``-ln Q`` weights over cycles supported by
    ``P`` (letters for Bernoulli pairs).  Used to mark rate functions
    infinite outside their effective domain.
    """
    if q is None or q is p:
        return -gamma_plus(p, n=n), -gamma_minus(p, n=n)
    if isinstance(p, Bernoulli) and isinstance(q, Bernoulli):
        mask = p.probs > 0
        vals = -np.log(q.probs[mask])
        return float(vals.min()), float(vals.max())
    if isinstance(p, (Bernoulli, Markov)) and isinstance(q, (Bernoulli, Markov)):
        pm, qm = p.as_markov(), q.as_markov()
        with np.errstate(divide="ignore"):
            W = np.where(pm.P > 0, -np.log(qm.P), -np.inf)
        hi = max_mean_cycle(W).value
        lo = -max_mean_cycle(np.where(np.isfinite(W), -W, -np.inf)).value
        return float(lo), float(hi)
    size = p.alphabet.size
    if size**n > WORD_BUDGET:
        raise InstanceTooLarge(f"{size}^{n} words exceed the enumeration budget")
    words = enumerate_words(size, n)
    lp, lq = p.log_marginals(words), q.log_marginals(words)
    vals = -lq[np.isfinite(lp)] / n
    return float(vals.min()), float(vals.max())


__all__ = [
    "CycleResult",
    "max_mean_cycle",
    "enumerate_simple_cycles",
    "gamma_plus",
    "gamma_minus",
    "entropy",
    "cross_entropy",
    "h_top_support",
    "support_rate_interval",
    "parry_chain",
]
