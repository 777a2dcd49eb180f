"""Alphabets, words and the stationary measure models on a finite shift space.

Every model exposes the same small surface: log-marginals of finite words
(``-inf`` off the support), a support test, and a sampler driven by an
explicit counter-based stream.  Internally each model also carries a
*hidden-chain representation* ``(init, trans, emit)``: a stationary Markov
chain on a finite hidden alphabet together with a map to visible letters.
Bernoulli and Markov models are the degenerate cases with ``emit`` the
identity, which lets the forward recursion, the samplers and the
decoupling computations share one code path.
"""

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from . import _rng
from .errors import (
    AlphabetMismatch,
    MalformedDocument,
    NotIrreducible,
    RowNotStochastic,
)

STOCHASTIC_TOL = 1e-9
STATIONARY_TOL = 1e-12


@dataclass(frozen=True)
class Alphabet:
    """Ordered set of distinct, nonempty text labels."""

    symbols: tuple

    def __post_init__(self):
        symbols = tuple(str(s) for s in self.symbols)
        if not symbols:
            raise MalformedDocument("alphabet must contain at least one symbol")
        if any(s == "" for s in symbols):
            raise MalformedDocument("alphabet labels must be nonempty")
        if len(set(symbols)) != len(symbols):
            raise MalformedDocument(f"alphabet labels are not unique: {symbols}")
        object.__setattr__(self, "symbols", symbols)

    @property
    def size(self):
        return len(self.symbols)

    def index(self, label):
        try:
            return self.symbols.index(label)
        except ValueError:
            raise AlphabetMismatch(f"{label!r} is not in alphabet {self.symbols}") from None

    def word(self, letters):
        """Build a :class:`Word` from a string or a sequence of labels.

        A plain string is split into characters when every label is a single
        character, and on commas otherwise.
        """
        if isinstance(letters, str):
            if all(len(s) == 1 for s in self.symbols):
                letters = list(letters)
            else:
                letters = [t for t in letters.split(",") if t]
        return Word(self, tuple(self.index(a) for a in letters))


@dataclass(frozen=True)
class Word:
    """Finite word over an :class:`Alphabet`, stored as symbol indices."""

    alphabet: Alphabet
    indices: tuple = ()

    def __post_init__(self):
        indices = tuple(int(i) for i in self.indices)
        size = self.alphabet.size
        if any(i < 0 or i >= size for i in indices):
            raise AlphabetMismatch(f"symbol index out of range for alphabet of size {size}")
        object.__setattr__(self, "indices", indices)

    @property
    def length(self):
        return len(self.indices)

    def __len__(self):
        return len(self.indices)

    def __getitem__(self, item):
        if isinstance(item, slice):
            return Word(self.alphabet, self.indices[item])
        return self.indices[item]

    def __add__(self, other):
        if not isinstance(other, Word):
            return NotImplemented
        if other.alphabet != self.alphabet:
            raise AlphabetMismatch("cannot concatenate words over different alphabets")
        return Word(self.alphabet, self.indices + other.indices)

    def __mul__(self, times):
        return Word(self.alphabet, self.indices * int(times))

    def __str__(self):
        labels = [self.alphabet.symbols[i] for i in self.indices]
        sep = "" if all(len(s) == 1 for s in self.alphabet.symbols) else ","
        return sep.join(labels)

    def as_array(self):
        return np.asarray(self.indices, dtype=np.int64)


def as_indices(word, alphabet=None):
    """Return the symbol indices of ``word`` as a 1-D int64 array.

    Accepts a :class:`Word` (checked against ``alphabet`` when given), a
    string (requires ``alphabet``) or any integer sequence.
    """
    if isinstance(word, Word):
        if alphabet is not None and word.alphabet != alphabet:
            raise AlphabetMismatch("word alphabet differs from model alphabet")
        return word.as_array()
    if isinstance(word, str):
        if alphabet is None:
            raise TypeError("a string word needs an alphabet")
        return alphabet.word(word).as_array()
    arr = np.asarray(word, dtype=np.int64).reshape(-1)
    if alphabet is not None and arr.size and (arr.min() < 0 or arr.max() >= alphabet.size):
        raise AlphabetMismatch("symbol index out of range for model alphabet")
    return arr


def enumerate_words(size, n):
    """All words of ``A^n`` in lexicographic order, as an ``(size**n, n)`` array."""
    if n == 0:
        return np.zeros((1, 0), dtype=np.int64)
    total = size**n
    idx = np.arange(total, dtype=np.int64)
    powers = size ** np.arange(n - 1, -1, -1, dtype=np.int64)
    return (idx[:, None] // powers[None, :]) % size


def is_irreducible(matrix):
    """Positivity of ``sum_{i=1..N} adj^i`` for the boolean adjacency of ``matrix``."""
    adj = (np.asarray(matrix) > 0).astype(np.int64)
    n = adj.shape[0]
    reach = np.zeros_like(adj)
    power = np.eye(n, dtype=np.int64)
    for _ in range(n):
        power = np.minimum(power @ adj, 1)
        reach = np.maximum(reach, power)
    return bool(reach.all())


def stationary_vector(matrix):
    """Stationary distribution of an irreducible stochastic matrix.

    Direct solve of ``pi (P - I) = 0`` with one equation replaced by the
    normalisation, followed by a projection onto the nonnegative orthant.
    """
    P = np.asarray(matrix, dtype=np.float64)
    n = P.shape[0]
    A = P.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    pi = np.linalg.solve(A, b)
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    resid = np.abs(pi @ P - pi).max()
    if resid > 1e3 * STATIONARY_TOL:
        raise NotIrreducible(f"stationary solve residual {resid:.2e} exceeds tolerance")
    return pi


def _check_stochastic(rows, what):
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    if not np.all(np.isfinite(rows)) or (rows < 0).any():
        raise RowNotStochastic(f"{what}: entries must be finite and nonnegative")
    sums = rows.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > STOCHASTIC_TOL)
    if bad.size:
        i = int(bad[0])
        raise RowNotStochastic(f"{what}: row {i} sums to {sums[i]!r}, not 1")
    return rows


def _safe_log(x):
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(divide="ignore"):
        return np.log(x)


@njit(cache=True)
def _sample_hidden_path(init_cdf, trans_cdf, emit, key, length, out):
    h = _rng.draw(init_cdf[0], _rng.uniform(key, 0))
    out[0] = emit[h]
    for i in range(1, length):
        h = _rng.draw(trans_cdf[h], _rng.uniform(key, i))
        out[i] = emit[h]


@dataclass(frozen=True)
class Stream:
    """Identifies one independent counter-based random stream."""

    seed: int = 0
    stream_id: int = 0

    @property
    def key(self):
        return np.uint64(_rng.stream_key(self.seed, self.stream_id))


class MeasureModel:
    """Interface shared by :class:`Bernoulli`, :class:`Markov` and :class:`HiddenMarkov`.

    Subclasses set ``alphabet``, ``kind`` and the hidden-chain arrays
    ``init``, ``trans`` and ``emit`` in their constructor.  Instances are
    treated as immutable.
    """

    kind = None
    exact = True

    alphabet: Alphabet
    init: np.ndarray
    trans: np.ndarray
    emit: np.ndarray

    def _finish(self):
        for name in ("init", "trans", "emit"):
            getattr(self, name).setflags(write=False)
        self._init_cdf = _rng.cdf_rows(self.init)
        self._trans_cdf = _rng.cdf_rows(self.trans)
        self._emit_masks = np.stack([(self.emit == a) for a in range(self.alphabet.size)]).astype(np.float64)

    # -- marginals -----------------------------------------------------
    def log_marginal(self, word):
        """``ln P_n(word)``; ``-inf`` off the support and ``0`` for the empty word."""
        u = as_indices(word, self.alphabet)
        if u.size == 0:
            return 0.0
        return float(self.log_marginals(u[None, :])[0])

    def log_marginals(self, words):
        """Vectorised :meth:`log_marginal` over the rows of a 2-D index array."""
        words = np.atleast_2d(np.asarray(words, dtype=np.int64))
        return _forward_log(self.init, self.trans, self._emit_masks, words)

    def supports(self, word):
        return self.log_marginal(word) > -math.inf

    def marginal(self, word):
        return math.exp(self.log_marginal(word))

    def log_marginals_all(self, n):
        """Log-marginals of every word of ``A^n`` in lexicographic order."""
        return self.log_marginals(enumerate_words(self.alphabet.size, n))

    # -- sampling ------------------------------------------------------
    def sample_prefix(self, length, stream=None):
        """Sample ``x_1^length`` from the stream (default ``Stream(0, 0)``)."""
        if length < 1:
            raise ValueError("length must be >= 1")
        stream = stream or Stream()
        out = np.empty(length, dtype=np.int64)
        _sample_hidden_path(self._init_cdf, self._trans_cdf, self.emit, stream.key, length, out)
        return Word(self.alphabet, tuple(out))

    # -- misc ----------------------------------------------------------
    def as_hidden_markov(self):
        return HiddenMarkov(
            self.alphabet,
            Alphabet(tuple(f"h{i}" for i in range(len(self.init)))),
            self.trans,
            [self.alphabet.symbols[a] for a in self.emit],
        )

    def check_alphabet(self, other):
        if self.alphabet != other.alphabet:
            raise AlphabetMismatch(
                f"models live on different alphabets: {self.alphabet.symbols} vs {other.alphabet.symbols}"
            )


def _forward_log(init, trans, emit_masks, words):
    # scaled forward pass over per-letter restricted transitions
    n_words, n = words.shape
    out = np.zeros(n_words)
    if n == 0:
        return out
    alpha = init[None, :] * emit_masks[words[:, 0]]
    for t in range(n):
        if t > 0:
            alpha = (alpha @ trans) * emit_masks[words[:, t]]
        c = alpha.sum(axis=1)
        pos = c > 0
        out[pos] += np.log(c[pos])
        out[~pos] = -np.inf
        alpha[pos] /= c[pos, None]
    return out


class Bernoulli(MeasureModel):
    """IID product measure with letter probabilities ``probs``."""

    kind = "bernoulli"

    def __init__(self, alphabet, probs):
        self.alphabet = alphabet if isinstance(alphabet, Alphabet) else Alphabet(tuple(alphabet))
        probs = np.asarray(probs, dtype=np.float64).reshape(-1)
        if probs.size != self.alphabet.size:
            raise MalformedDocument(f"probs has {probs.size} entries for an alphabet of size {self.alphabet.size}")
        probs = _check_stochastic(probs, "probs")[0]
        self.probs = probs
        self.log_probs = _safe_log(probs)
        self.init = probs.copy()
        self.trans = np.tile(probs, (probs.size, 1))
        self.emit = np.arange(probs.size)
        self.probs.setflags(write=False)
        self.log_probs.setflags(write=False)
        self._finish()

    def log_marginals(self, words):
        words = np.atleast_2d(np.asarray(words, dtype=np.int64))
        return self.log_probs[words].sum(axis=1)

    def as_markov(self):
        return Markov(self.alphabet, self.trans, _stationary=self.probs)

    def to_document(self):
        return _doc(type="bernoulli", alphabet=",".join(self.alphabet.symbols), probs=_fmt_row(self.probs))

    def __repr__(self):
        return f"Bernoulli({dict(zip(self.alphabet.symbols, self.probs.tolist()))})"


class Markov(MeasureModel):
    """Stationary irreducible Markov chain with transition matrix ``rows``."""

    kind = "markov"

    def __init__(self, alphabet, rows, _stationary=None):
        self.alphabet = alphabet if isinstance(alphabet, Alphabet) else Alphabet(tuple(alphabet))
        try:
            shape = np.asarray(rows, dtype=np.float64).shape
        except ValueError:
            raise MalformedDocument("transition rows have unequal lengths") from None
        if shape != (self.alphabet.size, self.alphabet.size):
            raise MalformedDocument(f"transition matrix must be {self.alphabet.size}x{self.alphabet.size}, got {shape}")
        P = _check_stochastic(rows, "rows")
        # _stationary: IID chains with null letters are irreducible only on their support
        if _stationary is None and not is_irreducible(P):
            raise NotIrreducible("transition matrix is not irreducible")
        self.P = P
        self.log_P = _safe_log(P)
        self.pi = stationary_vector(P) if _stationary is None else np.array(_stationary, dtype=np.float64)
        self.log_pi = _safe_log(self.pi)
        self.init = self.pi.copy()
        self.trans = P.copy()
        self.emit = np.arange(P.shape[0])
        for a in (self.P, self.log_P, self.pi, self.log_pi):
            a.setflags(write=False)
        self._finish()

    def log_marginals(self, words):
        words = np.atleast_2d(np.asarray(words, dtype=np.int64))
        out = self.log_pi[words[:, 0]] if words.shape[1] else np.zeros(words.shape[0])
        if words.shape[1] > 1:
            out = out + self.log_P[words[:, :-1], words[:, 1:]].sum(axis=1)
        return out

    def as_markov(self):
        return self

    def to_document(self):
        return _doc(
            type="markov",
            alphabet=",".join(self.alphabet.symbols),
            rows=";".join(_fmt_row(r) for r in self.P),
        )

    def __repr__(self):
        return f"Markov({self.P.tolist()})"


class HiddenMarkov(MeasureModel):
    """Image of a stationary irreducible hidden Markov chain under a letter map.

    ``letter_map[h]`` is the visible label of hidden symbol ``h``; the map
    must be onto the visible alphabet.
    """

    kind = "hmm"
    exact = False

    def __init__(self, alphabet, hidden_alphabet, hidden_rows, letter_map):
        self.alphabet = alphabet if isinstance(alphabet, Alphabet) else Alphabet(tuple(alphabet))
        self.hidden_alphabet = (
            hidden_alphabet if isinstance(hidden_alphabet, Alphabet) else Alphabet(tuple(hidden_alphabet))
        )
        H = _check_stochastic(hidden_rows, "hidden_rows")
        k = self.hidden_alphabet.size
        if H.shape != (k, k):
            raise MalformedDocument(f"hidden transition matrix must be {k}x{k}, got {H.shape}")
        if len(letter_map) != k:
            raise MalformedDocument(f"letter_map has {len(letter_map)} entries for {k} hidden symbols")
        emit = np.array([self.alphabet.index(str(a)) for a in letter_map], dtype=np.int64)
        if set(emit.tolist()) != set(range(self.alphabet.size)):
            raise MalformedDocument("letter_map must be onto the visible alphabet")
        if not is_irreducible(H):
            raise NotIrreducible("hidden transition matrix is not irreducible")
        self.H = H
        self.hidden_pi = stationary_vector(H)
        self.init = self.hidden_pi.copy()
        self.trans = H.copy()
        self.emit = emit
        self.H.setflags(write=False)
        self.hidden_pi.setflags(write=False)
        self._finish()

    def restricted_transitions(self):
        """Per-letter matrices ``H_a[i, j] = H[i, j] * [emit(j) == a]``."""
        return [self.H * self._emit_masks[a][None, :] for a in range(self.alphabet.size)]

    def to_document(self):
        return _doc(
            type="hmm",
            alphabet=",".join(self.alphabet.symbols),
            hidden_alphabet=",".join(self.hidden_alphabet.symbols),
            hidden_rows=";".join(_fmt_row(r) for r in self.H),
            letter_map=",".join(self.alphabet.symbols[a] for a in self.emit),
        )

    def __repr__(self):
        return f"HiddenMarkov(hidden={self.H.tolist()}, letter_map={self.emit.tolist()})"


# -- model file format ------------------------------------------------------

def _fmt_row(row):
    return ",".join(repr(float(x)) for x in row)


def _doc(**items):
    return "".join(f"{k}={v}\n" for k, v in items.items())


def _parse_numbers(text, key):
    try:
        return [float(t) for t in text.split(",")]
    except ValueError:
        raise MalformedDocument(f"{key}: expected a comma-separated list of decimal numbers") from None


def _parse_rows(text, key):
    rows = [_parse_numbers(r, key) for r in text.split(";") if r.strip()]
    if not rows or len({len(r) for r in rows}) != 1:
        raise MalformedDocument(f"{key}: rows must be nonempty and of equal length")
    return np.array(rows)


def parse_model(text):
    """Parse a ``key=value`` model document into a validated model.

    Blank lines and lines starting with ``#`` are ignored.  See the README
    for the accepted keys.
    """
    fields = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise MalformedDocument(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in fields:
            raise MalformedDocument(f"line {lineno}: duplicate key {key!r}")
        fields[key] = value

    kind = fields.get("type")
    required = {
        "bernoulli": {"type", "alphabet", "probs"},
        "markov": {"type", "alphabet", "rows"},
        "hmm": {"type", "alphabet", "hidden_alphabet", "hidden_rows", "letter_map"},
    }
    if kind not in required:
        raise MalformedDocument(f"type must be one of {sorted(required)}, got {kind!r}")
    missing = required[kind] - fields.keys()
    extra = fields.keys() - required[kind]
    if missing:
        raise MalformedDocument(f"missing keys for {kind}: {sorted(missing)}")
    if extra:
        raise MalformedDocument(f"unexpected keys for {kind}: {sorted(extra)}")

    alphabet = Alphabet(tuple(s.strip() for s in fields["alphabet"].split(",")))
    if kind == "bernoulli":
        return Bernoulli(alphabet, _parse_numbers(fields["probs"], "probs"))
    if kind == "markov":
        return Markov(alphabet, _parse_rows(fields["rows"], "rows"))
    hidden = Alphabet(tuple(s.strip() for s in fields["hidden_alphabet"].split(",")))
    letter_map = [s.strip() for s in fields["letter_map"].split(",")]
    return HiddenMarkov(alphabet, hidden, _parse_rows(fields["hidden_rows"], "hidden_rows"), letter_map)


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return parse_model(fh.read())
