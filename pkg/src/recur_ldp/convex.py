"""Extended-real functions sampled on uniform grids, and their conjugates.

A :class:`GridFunction` stores values on ``start + i*step``; ``+inf`` is
kept as such and mirrored in an explicit mask.  Conjugation goes through
the lower convex hull of the finite points, so the cost is linear in the
number of input and output points after sorting.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import DegenerateFunction, NotBracketed

DEFAULT_STEP = 1e-3
ALPHA_RANGE = (-4.0, 3.0)
S_FLOOR, S_CEIL = -0.5, 5.0


@dataclass(frozen=True)
class Grid:
    """Uniform grid ``start, start + step, ..., stop`` (``stop`` rounded to the grid)."""

    start: float
    stop: float
    step: float = DEFAULT_STEP

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("grid step must be positive")
        if self.stop < self.start:
            raise ValueError("grid stop must not precede start")

    @property
    def size(self):
        return int(round((self.stop - self.start) / self.step)) + 1

    @property
    def points(self):
        # rounding keeps decimal grids clean (0 is hit exactly)
        return np.round(self.start + self.step * np.arange(self.size), 12)

    def index(self, x):
        """Index of the grid point nearest to ``x`` (clipped to the grid)."""
        return int(min(max(round((x - self.start) / self.step), 0), self.size - 1))


def default_s_grid(gamma_minus, step=DEFAULT_STEP):
    """``[-0.5, -gamma_minus + 1]`` clipped to ``[-0.5, 5]``."""
    hi = S_CEIL if not math.isfinite(gamma_minus) else min(S_CEIL, -gamma_minus + 1.0)
    return Grid(S_FLOOR, max(hi, S_FLOOR + step), step)


def default_alpha_grid(step=DEFAULT_STEP):
    return Grid(*ALPHA_RANGE, step)


@dataclass(frozen=True)
class GridFunction:
    """Sampled extended-real function.

    Parameters
    ----------
    grid : Grid
    values : array
        One value per grid point; ``+inf`` marks points outside the
        effective domain.
    variable : str
        Column label for the abscissa (``"s"`` or ``"alpha"``).
    saturated : array of bool, optional
        Points whose value was cut off by the edge of an input grid and is
        therefore only a lower bound.
    provenance : str
    meta : dict
        Free-form annotations.  ``meta["clipped"]``, when present, marks
        points that lie just outside the effective domain and carry the
        value of its nearest end.
    """

    grid: Grid
    values: np.ndarray
    variable: str = "s"
    saturated: np.ndarray = None
    provenance: str = "analytic"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.shape != (self.grid.size,):
            raise ValueError(f"expected {self.grid.size} values, got {v.shape}")
        if np.any(np.isnan(v)) or np.any(v == -np.inf):
            raise ValueError("values must be real or +inf")
        if not np.any(np.isfinite(v)):
            raise DegenerateFunction("grid function has no finite value")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        sat = np.zeros(v.size, bool) if self.saturated is None else np.array(self.saturated, bool)
        sat.setflags(write=False)
        object.__setattr__(self, "saturated", sat)

    @classmethod
    def from_callable(cls, grid, func, **kw):
        return cls(grid, np.asarray(func(grid.points), dtype=np.float64), **kw)

    @property
    def points(self):
        return self.grid.points

    @property
    def step(self):
        return self.grid.step

    @property
    def is_infinite(self):
        return ~np.isfinite(self.values)

    @property
    def finite(self):
        return np.isfinite(self.values)

    def at(self, x):
        """Value at the grid point nearest to ``x``."""
        return float(self.values[self.grid.index(x)])

    def replace(self, values, **kw):
        kw.setdefault("variable", self.variable)
        kw.setdefault("provenance", self.provenance)
        kw.setdefault("meta", dict(self.meta))
        return GridFunction(self.grid, values, **kw)

    def to_csv(self, header=()):
        lines = [f"# {h}" for h in header]
        lines.append(f"# provenance={self.provenance}")
        if self.saturated.any():
            lines.append(f"# edge_saturated_points={int(self.saturated.sum())}")
        lines.append(f"{self.variable},value,is_infinite")
        for x, v in zip(self.points, self.values):
            lines.append(f"{x:.10g},{'inf' if math.isinf(v) else format(v, '.17g')},{int(math.isinf(v))}")
        return "\n".join(lines) + "\n"


def _lower_hull(x, y):
    """Indices of the lower convex hull of points sorted by ``x``."""
    hull = []
    for i in range(len(x)):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            # drop b if it lies on or above the chord a -> i
            if (y[b] - y[a]) * (x[i] - x[a]) >= (y[i] - y[a]) * (x[b] - x[a]):
                hull.pop()
            else:
                break
        hull.append(i)
    return np.array(hull, dtype=np.int64)


def conjugate_points(x, y, dual):
    """Conjugate ``sup_i (a x_i - y_i)`` of finite points at every ``a`` in ``dual``.

    Returns ``(values, argmax_index, saturated_low, saturated_high)``, where
    the saturation flags mark dual points beyond the extreme hull slopes.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if x.size < 1:
        raise DegenerateFunction("conjugation needs a finite point")
    order = np.argsort(x, kind="stable")
    x, y = x[order], y[order]
    h = _lower_hull(x, y)
    hx, hy = x[h], y[h]
    slopes = np.diff(hy) / np.diff(hx)
    dual = np.asarray(dual, float)
    j = np.searchsorted(slopes, dual, side="left")
    vals = dual * hx[j] - hy[j]
    low = dual < slopes[0] if slopes.size else np.zeros(dual.shape, bool)
    high = dual > slopes[-1] if slopes.size else np.zeros(dual.shape, bool)
    return vals, order[h[j]], low, high


def legendre(f, dual_grid, variable=None):
    """Legendre-Fenchel conjugate of ``f`` sampled on ``dual_grid``.

    Points where ``f`` is infinite are skipped; a single finite point gives
    the exact affine conjugate of an indicator.  A dual point whose
    supremum sits on a finite end point of ``f`` that is also the end of
    ``f``'s grid is flagged ``saturated``: the true conjugate may be larger
    there.
    """
    if isinstance(dual_grid, GridFunction):
        dual_grid = dual_grid.grid
    fin = f.finite
    vals, _, low, high = conjugate_points(f.points[fin], f.values[fin], dual_grid.points)
    sat = (low & bool(fin[0])) | (high & bool(fin[-1]))
    if variable is None:
        variable = "alpha" if f.variable == "s" else "s"
    return GridFunction(dual_grid, vals, variable=variable, saturated=sat, provenance=f.provenance)


def is_convex(f, tol=1e-9):
    """True when the finite region is contiguous with second differences ``>= -tol``.

    Second differences touching a point flagged in ``f.meta["clipped"]``
    are skipped: such a point stands for the domain end, not for its own
    abscissa.
    """
    idx = np.flatnonzero(f.finite)
    if idx[-1] - idx[0] + 1 != idx.size:
        return False
    v = f.values[idx[0] : idx[-1] + 1]
    if v.size < 3:
        return True
    d2 = np.diff(v, 2)
    clipped = f.meta.get("clipped")
    if clipped is not None:
        c = np.asarray(clipped, bool)[idx[0] : idx[-1] + 1]
        d2 = d2[~(c[:-2] | c[1:-1] | c[2:])]
    return bool(np.all(d2 >= -tol))


def find_s0(rate):
    """Grid point minimising ``s + rate(s)``; ties go to the smallest ``s``."""
    g = rate.points + rate.values
    if not np.any(np.isfinite(g)):
        raise DegenerateFunction("rate function has no finite value")
    return float(rate.points[int(np.argmin(g))])


def find_alpha_star(pressure, gamma_plus, tol=1e-12):
    """Root ``alpha*`` in ``[-1, 0)`` of ``pressure(alpha) = gamma_plus``.

    ``pressure`` is a callable or a :class:`GridFunction` (linearly
    interpolated).  Returns ``0`` when ``gamma_plus == 0`` and ``-1`` when
    the pressure already equals ``gamma_plus`` at ``-1``.
    """
    if gamma_plus == 0:
        return 0.0
    if isinstance(pressure, GridFunction):
        grid_fn = pressure

        def pressure(a):
            return float(np.interp(a, grid_fn.points, grid_fn.values))

    lo_val = pressure(-1.0) - gamma_plus
    hi_val = pressure(0.0) - gamma_plus
    if abs(lo_val) <= tol * (1.0 + abs(gamma_plus)):
        return -1.0
    if lo_val > 0 or hi_val < 0:
        raise NotBracketed(f"gamma_plus={gamma_plus} is not attained by the pressure on [-1, 0]")
    return float(brentq(lambda a: pressure(a) - gamma_plus, -1.0, 0.0, xtol=1e-14, rtol=1e-15))


__all__ = [
    "Grid",
    "GridFunction",
    "default_s_grid",
    "default_alpha_grid",
    "conjugate_points",
    "legendre",
    "is_convex",
    "find_s0",
    "find_alpha_star",
]
