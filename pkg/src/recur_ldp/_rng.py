"""Counter-based uniform generator used by every sampler.

The uniform attached to ``(seed, stream, counter)`` is a pure function of
those three integers: a splitmix64 sequence whose starting state is a hash of
``(seed, stream)``, read at position ``counter``.  Samplers never carry hidden
state, so any sample can be regenerated in isolation and parallel evaluation
order does not affect results.
"""

import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_STREAM = np.uint64(0xD1B54A32D192ED03)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_INV53 = 1.0 / 9007199254740992.0


@njit(cache=True)
def _mix(z):
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    return z ^ (z >> _S31)


@njit(cache=True)
def stream_key(seed, stream):
    """Starting state of the splitmix64 sequence for ``(seed, stream)``."""
    a = _mix(np.uint64(seed) + _GOLDEN)
    return _mix(a ^ (np.uint64(stream) * _STREAM + _GOLDEN))


@njit(cache=True)
def uniform(key, counter):
    """Uniform double in [0, 1) at position ``counter`` of the stream ``key``."""
    z = _mix(key + (np.uint64(counter) + _ONE) * _GOLDEN)
    return np.float64(z >> _S11) * _INV53


@njit(cache=True)
def draw(cdf_row, u):
    """Inverse-CDF draw; ``cdf_row[-1]`` is exactly 1."""
    j = 0
    last = cdf_row.shape[0] - 1
    while j < last and u >= cdf_row[j]:
        j += 1
    return j


def cdf_rows(matrix):
    """Row-wise cumulative sums with the last column pinned to 1."""
    cdf = np.cumsum(np.atleast_2d(np.asarray(matrix, dtype=np.float64)), axis=1)
    cdf[:, -1] = 1.0
    return np.ascontiguousarray(cdf)
