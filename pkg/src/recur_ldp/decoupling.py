"""Finite-n decoupling constants, periodic-approximation witnesses and psi-mixing.

All quantities are computed for word lengths ``n, m`` in ``1..n_max`` only;
they describe how the constants grow, not their asymptotic behaviour.

Two routes are available.  ``"enumerate"`` lists every word ``u xi v`` and
works for any model.  ``"structural"`` (Bernoulli and Markov only) uses the
fact that ``P(u xi v) / (P(u) P(v))`` depends only on the last letter of
``u``, the gap word and the first letter of ``v``; it is exact and cheap, so
product measures come out as exactly ``1``.

Ratio conventions: ``0/0 = 1`` and ``x/0 = inf`` for ``x > 0``.  Every
constant is reported as at least ``1``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import measures
from .core import Bernoulli, Markov, Word, enumerate_words
from .errors import InstanceTooLarge, UnsupportedModel
from .measures import WORD_BUDGET

DEFAULT_N_MAX = 6
PA_REPEATS = 8


def _exact(model):
    return isinstance(model, (Bernoulli, Markov))


def _route(method, *models):
    if method == "auto":
        return "structural" if all(_exact(m) for m in models) else "enumerate"
    if method == "structural" and not all(_exact(m) for m in models):
        raise UnsupportedModel("the structural route needs Bernoulli or Markov models")
    if method not in ("structural", "enumerate"):
        raise ValueError(f"unknown method {method!r}")
    return method


def _guard(size, length, budget=WORD_BUDGET):
    if size**length > budget:
        raise InstanceTooLarge(f"{size}^{length} words exceed the enumeration budget {budget}")


def _clamp(log_c):
    # constants are multiplicative slack; anything below 1 is reported as 1
    return np.exp(np.maximum(np.asarray(log_c, dtype=np.float64), 0.0))


# --------------------------------------------------------------------------
# structural route


def _chain(model):
    m = model.as_markov()
    keep = np.flatnonzero(m.pi > 0)
    return m.log_P[np.ix_(keep, keep)], m.log_pi[keep], keep


def _maxplus_paths(logP, length):
    """Best log weight of a path with ``length`` edges between each pair of states."""
    out = logP
    for _ in range(length - 1):
        out = np.max(out[:, :, None] + logP[None, :, :], axis=1)
    return out


def _path_logs(logP, ell):
    """Log weights ``i -> xi_1 -> ... -> xi_ell -> j`` for every gap word, shape ``(|A|^ell, k, k)``."""
    if ell == 0:
        return logP[None].copy()
    gaps = enumerate_words(logP.shape[0], ell)
    first = logP[:, gaps[:, 0]].T
    mid = logP[gaps[:, :-1], gaps[:, 1:]].sum(axis=1)
    last = logP[gaps[:, -1], :]
    return first[:, :, None] + mid[:, None, None] + last[:, None, :]


def _ud_structural(model, tau):
    logP, logpi, _ = _chain(model)
    best = _maxplus_paths(logP, tau + 1)
    return float(np.max(best - logpi[None, :]))


def _sld_structural(model, tau):
    logP, logpi, _ = _chain(model)
    best = np.full(logP.shape, -np.inf)
    for ell in range(tau + 1):
        best = np.maximum(best, _maxplus_paths(logP, ell + 1))
    with np.errstate(invalid="ignore"):
        ratio = np.where(np.isfinite(best), logpi[None, :] - best, np.inf)
    return float(np.max(ratio))


# --------------------------------------------------------------------------
# enumeration route


def _split_logs(model, n, gap, m):
    """Log-marginals of ``u xi v`` shaped ``(|A|^n, |A|^gap, |A|^m)`` plus those of ``u`` and ``v``."""
    size = model.alphabet.size
    _guard(size, n + gap + m)
    lw = model.log_marginals_all(n + gap + m).reshape(size**n, size**gap, size**m)
    return lw, model.log_marginals_all(n), model.log_marginals_all(m)


def _ud_enumerate(model, n, m, tau):
    lw, lu, lv = _split_logs(model, n, tau, m)
    pair = lu[:, None, None] + lv[None, None, :]
    sup = np.isfinite(pair)
    with np.errstate(invalid="ignore"):
        ratio = np.where(sup, lw - np.where(sup, pair, 0.0), 0.0)  # 0/0 -> log 1
    return float(np.max(ratio))


def _sld_enumerate(model, n, m, tau):
    size = model.alphabet.size
    best = np.full((size**n, size**m), -np.inf)
    for ell in range(tau + 1):
        lw, lu, lv = _split_logs(model, n, ell, m)
        best = np.maximum(best, lw.max(axis=1))
    pair = lu[:, None] + lv[None, :]
    sup = np.isfinite(pair)
    if not sup.any():
        return 0.0
    with np.errstate(invalid="ignore"):
        ratio = np.where(np.isfinite(best), pair - best, np.inf)
    return float(np.max(ratio[sup]))


def _joint_log_ratio(lw, lu, lv):
    # ln P(u)P(v)/P(u xi v) with 0/x = 0 (-inf) and x/0 = inf
    pair = lu[:, None, None] + lv[None, None, :]
    sup = np.isfinite(pair)
    with np.errstate(invalid="ignore"):
        r = np.where(np.isfinite(lw), np.where(sup, pair, 0.0) - lw, np.inf)
    return np.where(sup, r, -np.inf)


def _jsld_enumerate(p, q, n, m, tau):
    size = p.alphabet.size
    best = np.full((size**n, size**m), np.inf)
    for ell in range(tau + 1):
        rp = _joint_log_ratio(*_split_logs(p, n, ell, m))
        rq = _joint_log_ratio(*_split_logs(q, n, ell, m))
        best = np.minimum(best, np.maximum(rp, rq).min(axis=1))
    return float(np.max(best))


def _jsld_structural(p, q, n, m, tau):
    size = p.alphabet.size
    _guard(size, max(n, m))
    # support classes: (boundary letter, P-supported, Q-supported)
    us, vs = enumerate_words(size, n), enumerate_words(size, m)
    u_cls = {(int(a), bool(x), bool(y)) for a, x, y in
             zip(us[:, -1], np.isfinite(p.log_marginals(us)), np.isfinite(q.log_marginals(us)))}
    v_cls = {(int(a), bool(x), bool(y)) for a, x, y in
             zip(vs[:, 0], np.isfinite(p.log_marginals(vs)), np.isfinite(q.log_marginals(vs)))}
    pm, qm = p.as_markov(), q.as_markov()
    tables = []
    for model in (pm, qm):
        rows = []
        for ell in range(tau + 1):
            paths = _path_logs(model.log_P, ell)
            with np.errstate(invalid="ignore"):
                rows.append(np.where(np.isfinite(paths), model.log_pi[None, None, :] - paths, np.inf))
        tables.append(rows)
    out = -np.inf
    for i, pu, qu in u_cls:
        for j, pv, qv in v_cls:
            sp, sq = pu and pv, qu and qv
            if not (sp or sq):
                continue
            val = np.inf
            for rp, rq in zip(*tables):
                a = rp[:, i, j] if sp else np.full(rp.shape[0], -np.inf)
                b = rq[:, i, j] if sq else np.full(rq.shape[0], -np.inf)
                val = min(val, float(np.min(np.maximum(a, b))))
            out = max(out, val)
    return out


# --------------------------------------------------------------------------
# public constants


def _per_n(n_max, func):
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    vals = [max(func(n, m) for m in range(1, n_max + 1)) for n in range(1, n_max + 1)]
    return _clamp(vals)


def ud_constants(model, n_max=DEFAULT_N_MAX, tau=0, method="auto"):
    """Best upper decoupling constants ``C_UD(n)``, ``n = 1..n_max``.

    ``C_UD(n) = max P(u xi v) / (P(u) P(v))`` over ``u`` in ``A^n``,
    ``xi`` in ``A^tau`` and ``v`` in ``A^m`` with ``m <= n_max``.

    Returns
    -------
    ndarray
        Entry ``n - 1`` holds ``C_UD(n)``; values may be ``inf``.

    Raises
    ------
    InstanceTooLarge
        When the enumeration route would list more words than the budget.
    """
    if _route(method, model) == "structural":
        c = _ud_structural(model, tau)
        return _per_n(n_max, lambda n, m: c)
    _guard(model.alphabet.size, 2 * n_max + tau)
    return _per_n(n_max, lambda n, m: _ud_enumerate(model, n, m, tau))


def sld_constants(model, n_max=DEFAULT_N_MAX, tau=0, method="auto"):
    """Best selective lower decoupling constants ``C_SLD(n)``.

    For supported ``u, v`` the best gap word of length ``<= tau`` is chosen;
    ``inf`` when no gap word joins them with positive probability.
    """
    if _route(method, model) == "structural":
        c = _sld_structural(model, tau)
        return _per_n(n_max, lambda n, m: c)
    _guard(model.alphabet.size, 2 * n_max + tau)
    return _per_n(n_max, lambda n, m: _sld_enumerate(model, n, m, tau))


def jsld_constants(p, q, n_max=DEFAULT_N_MAX, tau=0, method="auto"):
    """Joint selective lower decoupling: one gap word must serve ``p`` and ``q`` at once."""
    p.check_alphabet(q)
    if _route(method, p, q) == "structural":
        return _per_n(n_max, lambda n, m: _jsld_structural(p, q, n, m, tau))
    _guard(p.alphabet.size, 2 * n_max + tau)
    return _per_n(n_max, lambda n, m: _jsld_enumerate(p, q, n, m, tau))


# --------------------------------------------------------------------------
# psi-mixing


def _forward_backward(model, n, m):
    """Unnormalised forward vectors of ``A^n`` and backward vectors of ``A^m``."""
    size = model.alphabet.size
    _guard(size, max(n, m))
    masks, T = model._emit_masks, model.trans
    us, vs = enumerate_words(size, n), enumerate_words(size, m)
    fwd = model.init[None, :] * masks[us[:, 0]]
    for t in range(1, n):
        fwd = (fwd @ T) * masks[us[:, t]]
    # bwd[v, h] = P(v occupies the next m positions | hidden state h now)
    bwd = np.ones((vs.shape[0], T.shape[0]))
    for t in range(m - 1, -1, -1):
        bwd = (bwd * masks[vs[:, t]]) @ T.T
    return fwd, bwd


def _psi_enumerate(model, tau, n_max):
    T_gap = np.linalg.matrix_power(model.trans, tau)
    worst = 0.0
    for n in range(1, n_max + 1):
        for m in range(1, n_max + 1):
            fwd, bwd = _forward_backward(model, n, m)
            pu = fwd.sum(axis=1)
            pv = bwd @ model.init
            joint = fwd @ T_gap @ bwd.T
            sup = (pu[:, None] > 0) & (pv[None, :] > 0)
            denom = np.where(sup, pu[:, None] * pv[None, :], 1.0)
            dev = np.abs(joint / denom - 1.0)
            worst = max(worst, float(dev[sup].max()))
    return worst


def _psi_structural(model, tau):
    if isinstance(model, Bernoulli):
        return 0.0  # independent letters at every gap
    m = model.as_markov()
    Pk = np.linalg.matrix_power(m.P, tau + 1)
    return float(np.max(np.abs(Pk / m.pi[None, :] - 1.0)))


def psi_mixing(model, tau_max=DEFAULT_N_MAX, n_max=DEFAULT_N_MAX, method="auto"):
    """``psi(tau)`` for ``tau = 0..tau_max``: worst relative deviation from independence.

    The maximum runs over ``n, m <= n_max`` and supported ``u, v`` of
    ``|P([u] and T^{-n-tau}[v]) / (P(u) P(v)) - 1|``.
    """
    route = _route(method, model)
    if route == "structural":
        return np.array([_psi_structural(model, t) for t in range(tau_max + 1)])
    return np.array([_psi_enumerate(model, t, n_max) for t in range(tau_max + 1)])


# --------------------------------------------------------------------------
# periodic approximation


@dataclass(frozen=True)
class PaWitness:
    """Periodic word whose repeats have log-probability rate ``rate`` per letter."""

    word: Word
    period: int
    rate: float
    sequence: np.ndarray = field(repr=False)

    def to_text(self):
        seq = ",".join(format(x, ".17g") for x in self.sequence)
        return f"word={self.word}\nperiod={self.period}\nrate={self.rate:.17g}\nsequence={seq}\n"


def pa_witness(model, epsilon=0.0, repeats=PA_REPEATS):
    """Periodic word achieving ``gamma_plus`` (within ``epsilon``).

    Bernoulli: the most likely letter.  Markov: the cycle of maximal mean
    log weight.  ``sequence[k-1] = ln P(u^k) / (k p)`` for ``k = 1..repeats``
    is attached as evidence of convergence to ``rate``.
    """
    if isinstance(model, Bernoulli):
        letters = [int(np.argmax(model.probs))]
        rate = float(model.log_probs[letters[0]])
    elif isinstance(model, Markov):
        res = measures.max_mean_cycle(model.log_P)
        letters, rate = list(res.cycle), res.value
    else:
        raise UnsupportedModel("periodic approximation witnesses exist only for Bernoulli or Markov models")
    gp = measures.gamma_plus(model)
    if rate < gp - epsilon - 1e-12:  # pragma: no cover - optimal cycle by construction
        raise AssertionError("witness rate below gamma_plus")
    p = len(letters)
    seq = np.array([model.log_marginal(letters * k) / (k * p) for k in range(1, repeats + 1)])
    word = Word(model.alphabet, tuple(letters))
    return PaWitness(word, p, float(rate), seq)


# --------------------------------------------------------------------------
# event form


@dataclass(frozen=True)
class EventFormCheck:
    n: int
    m: int
    tau: int
    trials: int
    worst_ratio: float
    bound: float

    @property
    def holds(self):
        return self.worst_ratio <= self.bound * (1 + 1e-12)


def event_form_check(model, n, m, tau=0, trials=100, seed=0, n_max=None):
    """Compare ``P(A and T^{-n-tau} B)`` with ``C_UD(n) |A|^tau P(A) P(B)`` on random cylinder unions.

    ``A`` and ``B`` are random subsets of ``A^n`` and ``A^m``; the worst
    observed ratio ``P(A and T^{-n-tau}B) / (P(A)P(B))`` is returned next
    to the bound.
    """
    n_max = max(n, m) if n_max is None else n_max
    c = ud_constants(model, n_max=n_max, tau=tau)[n - 1]
    fwd, bwd = _forward_backward(model, n, m)
    pu, pv = fwd.sum(axis=1), bwd @ model.init
    joint = fwd @ np.linalg.matrix_power(model.trans, tau) @ bwd.T
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        a = rng.random(pu.size) < 0.5
        b = rng.random(pv.size) < 0.5
        pa, pb = pu[a].sum(), pv[b].sum()
        if pa > 0 and pb > 0:
            worst = max(worst, float(joint[np.ix_(a, b)].sum() / (pa * pb)))
    return EventFormCheck(n, m, tau, trials, worst, float(c * model.alphabet.size**tau))


# --------------------------------------------------------------------------
# report


@dataclass(frozen=True)
class DecouplingReport:
    tau: int
    n_max: int
    C_UD: np.ndarray
    C_SLD: np.ndarray
    C_JSLD: np.ndarray = None
    C_SLD_Q: np.ndarray = None
    pa_witness: PaWitness = None
    psi: np.ndarray = None
    method: str = "auto"

    def to_csv(self, header=()):
        lines = [f"# {h}" for h in header]
        lines.append(f"# tau={self.tau} method={self.method}")
        lines.append(f"# m restricted to 1..{self.n_max} (finite-n certificate only)")
        cols = ["n", "C_UD", "C_SLD"]
        data = [self.C_UD, self.C_SLD]
        if self.C_JSLD is not None:
            cols += ["C_SLD_Q", "C_JSLD"]
            data += [self.C_SLD_Q, self.C_JSLD]
        lines.append(",".join(cols))
        for i in range(self.n_max):
            lines.append(",".join([str(i + 1)] + [_fmt(d[i]) for d in data]))
        return "\n".join(lines) + "\n"

    def psi_csv(self, header=()):
        lines = [f"# {h}" for h in header] + [f"# n,m restricted to 1..{self.n_max}", "tau,psi"]
        lines += [f"{t},{_fmt(v)}" for t, v in enumerate(self.psi)]
        return "\n".join(lines) + "\n"


def _fmt(x):
    return "inf" if math.isinf(x) else format(float(x), ".17g")


def decoupling_report(p, q=None, n_max=DEFAULT_N_MAX, tau=0, method="auto", psi_tau_max=None):
    """Constants for ``p`` (and the joint ones for ``(p, q)``), the PA witness and ``psi``.

    ``psi`` covers gaps ``0..psi_tau_max`` (default ``tau``).
    """
    c_ud = ud_constants(p, n_max, tau, method)
    c_sld = sld_constants(p, n_max, tau, method)
    c_jsld = c_sld_q = None
    if q is not None and q is not p:
        c_sld_q = sld_constants(q, n_max, tau, method)
        c_jsld = jsld_constants(p, q, n_max, tau, method)
    witness = pa_witness(p) if _exact(p) else None
    psi = psi_mixing(p, tau if psi_tau_max is None else psi_tau_max, n_max, method)
    return DecouplingReport(tau, n_max, c_ud, c_sld, c_jsld, c_sld_q, witness, psi, method)


__all__ = [
    "ud_constants",
    "sld_constants",
    "jsld_constants",
    "psi_mixing",
    "PaWitness",
    "pa_witness",
    "EventFormCheck",
    "event_form_check",
    "DecouplingReport",
    "decoupling_report",
]
