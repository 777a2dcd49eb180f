"""scikit-learn style wrappers.

Thin adapters over the functional API so the estimators compose with
``Pipeline`` and ``clone``.  Trajectories are rows of a 2-D integer array
of symbol indices.
"""

import math

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import recurrence
from .convex import DEFAULT_STEP
from .rates import build_rates


def _rows(X):
    X = np.asarray(X)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or not np.issubdtype(X.dtype, np.integer):
        raise ValueError("expected a 2-D integer array of symbol indices")
    return X.astype(np.int64, copy=False)


class RecurrenceTimeTransformer(BaseEstimator, TransformerMixin):
    """Map each trajectory to ``(1/n) ln T`` for ``T`` in ``{R_n, V_n, W_n}``.

    Parameters
    ----------
    statistic : {"R", "V", "W"}
    n : int
        Prefix length.
    cap : int
        Largest time searched; censored rows map to NaN.
    reference : array of int, optional
        Text searched for the prefix when ``statistic="W"``; set by
        :meth:`fit` from ``y`` if not given.
    """

    def __init__(self, statistic="R", n=8, cap=1000, reference=None):
        self.statistic = statistic
        self.n = n
        self.cap = cap
        self.reference = reference

    def fit(self, X, y=None):
        if self.statistic not in ("R", "V", "W"):
            raise ValueError(f"unknown statistic {self.statistic!r}")
        _rows(X)
        ref = self.reference if self.reference is not None else y
        if self.statistic == "W":
            if ref is None:
                raise ValueError("statistic 'W' needs a reference text (reference= or y)")
            self.reference_ = np.asarray(ref, dtype=np.int64).reshape(-1)
        self.n_features_in_ = np.asarray(X).shape[-1]
        return self

    def _time(self, x):
        if self.statistic == "R":
            return recurrence.return_time(x, self.n, self.cap)
        if self.statistic == "V":
            return recurrence.nonoverlap_return_time(x, self.n, self.cap)
        ref = self.reference_
        return recurrence.waiting_time(x[: self.n], ref, min(self.cap, ref.size - self.n + 1))

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        out = np.empty((len(_rows(X)), 1))
        for i, x in enumerate(_rows(X)):
            t = self._time(x)
            out[i, 0] = math.nan if t.censored else math.log(t.value) / self.n
        return out


class EmpiricalPressureEstimator(BaseEstimator):
    """``(1/n) ln mean(T^alpha)`` over the trajectories passed to :meth:`fit`.

    Censored rows contribute ``cap^alpha``; ``censored_fraction_`` reports
    how many there were.
    """

    def __init__(self, statistic="R", alpha=-1.0, n=8, cap=1000, reference=None):
        self.statistic = statistic
        self.alpha = alpha
        self.n = n
        self.cap = cap
        self.reference = reference

    def fit(self, X, y=None):
        times = RecurrenceTimeTransformer(self.statistic, self.n, self.cap, self.reference).fit(X, y)
        s = times.transform(X)[:, 0]
        t = np.where(np.isnan(s), float(self.cap), np.exp(s * self.n))
        self.censored_fraction_ = float(np.isnan(s).mean())
        self.pressure_ = math.log(np.mean(t**self.alpha)) / self.n
        return self


class RateCurveTransformer(BaseEstimator, TransformerMixin):
    """Evaluate one analytic rate curve of ``model`` at the values passed to :meth:`transform`.

    ``curve`` is one of ``I_Q``, ``I_P``, ``I_W``, ``I_V`` or ``I_R``.
    Values are read at the nearest grid point; points off the grid give NaN.
    """

    def __init__(self, model=None, q=None, curve="I_R", step=DEFAULT_STEP):
        self.model = model
        self.q = q
        self.curve = curve
        self.step = step

    def fit(self, X=None, y=None):
        if self.model is None:
            raise ValueError("a model is required")
        curves = build_rates(self.model, self.q, step=self.step)
        self.rate_ = getattr(curves, self.curve)
        return self

    def transform(self, X):
        check_is_fitted(self, "rate_")
        s = np.asarray(X, dtype=np.float64)
        g = self.rate_.grid
        half = g.step / 2
        flat = np.array([self.rate_.at(v) if g.start - half <= v <= g.stop + half else math.nan
                         for v in s.reshape(-1)])
        return flat.reshape(s.shape)


__all__ = ["RecurrenceTimeTransformer", "EmpiricalPressureEstimator", "RateCurveTransformer"]
