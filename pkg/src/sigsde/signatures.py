"""Signatures of piecewise-linear paths and time augmentation."""
from dataclasses import dataclass
from math import factorial

import numpy as np

from .kernels import sig_fold
from .shuffle_algebra import TruncTensor, level_offsets


@dataclass(frozen=True)
class PiecewiseLinearPath:
    """Sampled path: strictly increasing ``times`` and matching ``values`` (L+1, dim)."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if times.ndim != 1 or len(times) != len(values):
            raise ValueError("times and values must have the same number of samples")
        if len(times) > 1 and not np.all(np.diff(times) > 0):
            raise ValueError("time grid must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def dim(self):
        return self.values.shape[1]

    @property
    def num_segments(self):
        return len(self.times) - 1

    def increments(self):
        return np.diff(self.values, axis=0)

    def reversed(self):
        T = self.times[-1] + self.times[0]
        return PiecewiseLinearPath(T - self.times[::-1], self.values[::-1])

    def drop_time(self):
        """Inverse of ``augment_time``: remove coordinate 0."""
        return PiecewiseLinearPath(self.times, self.values[:, 1:])


def augment_time(times, values):
    """Prepend the time grid as coordinate 0."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    return PiecewiseLinearPath(times, np.column_stack([times, values]))


def segment_signature(increment, q):
    """exp(increment) truncated at level q: word coefficient prod(Δ)/|word|!."""
    delta = np.atleast_1d(np.asarray(increment, dtype=float))
    width = delta.shape[0]
    offs = level_offsets(width, q)
    coeffs = np.zeros(offs[-1])
    coeffs[0] = 1.0
    block = np.ones(1)
    for k in range(1, q + 1):
        block = np.multiply.outer(block, delta).ravel()
        coeffs[offs[k]:offs[k + 1]] = block / factorial(k)
    return TruncTensor(width, q, coeffs)


def path_signature(path, s, t, q):
    """Signature of ``path`` restricted to grid indices [s, t] (Chen fold)."""
    if not 0 <= s <= t <= path.num_segments:
        raise ValueError(f"need 0 <= s <= t <= {path.num_segments}, got s={s}, t={t}")
    inc = path.increments()[s:t]
    coeffs = sig_fold(inc[None, :, :], q)[0]
    return TruncTensor(path.dim, q, coeffs)


def batch_signatures(values, q):
    """Signatures of many paths sampled on a common grid.

    ``values`` has shape (N, L+1, dim); returns flat coefficients (N, D).
    """
    values = np.asarray(values, dtype=float)
    return sig_fold(np.diff(values, axis=1), q)
