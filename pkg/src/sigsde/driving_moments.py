"""Expected signature of time-augmented Brownian motion X = (t, W).

The closed form is the tensor exponential of T e_0 + (T/2) sum_i e_(i,i)
(Stratonovich lift).  ``mc_expected_signature`` is an independent Monte
Carlo oracle built from piecewise-linear Brownian samples.
"""
import numpy as np

from .kernels import sig_fold
from .shuffle_algebra import TruncTensor, trunc_exp

#: Monte Carlo paths processed per batch (bounds memory at high levels)
MC_CHUNK = 5000


def brownian_generator(n, T, level):
    a = TruncTensor(n + 1, level)
    if level >= 1:
        a[(0,)] = T
    if level >= 2:
        for i in range(1, n + 1):
            a[(i, i)] = T / 2.0
    return a


def expected_signature_bm_time(n, T, q_max):
    if n < 0 or q_max < 0:
        raise ValueError("n and q_max must be non-negative")
    if T <= 0:
        raise ValueError("T must be positive")
    return trunc_exp(brownian_generator(n, T, q_max))


def brownian_increments(n, num_steps, dt, seed, index, trial=None):
    """Increments (num_steps, n) of one Brownian trajectory.

    The stream is keyed on (seed, [trial,] index) so any trajectory can be
    regenerated independently of how the batch is split.
    """
    key = (seed, index) if trial is None else (seed, trial, index)
    rng = np.random.default_rng(key)
    return rng.standard_normal((num_steps, n)) * np.sqrt(dt)


def driver_increments(n, num_steps, dt, seed, indices, trial=None):
    """Time-augmented increments (len(indices), num_steps, n+1)."""
    out = np.empty((len(indices), num_steps, n + 1))
    out[:, :, 0] = dt
    for row, idx in enumerate(indices):
        out[row, :, 1:] = brownian_increments(n, num_steps, dt, seed, idx, trial)
    return out


def num_grid_steps(T, dt):
    steps = int(round(T / dt))
    if steps < 1 or abs(steps * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError(f"dt={dt} does not divide T={T}")
    return steps


def mc_expected_signature(n, T, q_max, N, dt, seed, richardson=True):
    """Monte Carlo estimate of E[S(t, W)_{0,T}] with per-coefficient standard errors.

    Each sample is the signature of a piecewise-linear Brownian path on the
    dt-grid.  Piecewise-linear interpolation biases the mean by O(dt); with
    ``richardson`` the per-path value is 2 S(dt) - S(2 dt), both computed from
    the same draw (the coarse path keeps every other grid point), which
    removes the first-order term.  Requires an even number of steps.

    Returns ``(mean, stderr)`` as two TruncTensors.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    steps = num_grid_steps(T, dt)
    if richardson and steps % 2:
        raise ValueError("Richardson extrapolation needs an even number of steps")
    count = 0
    mean = None
    m2 = None
    for start in range(0, N, MC_CHUNK):
        idx = range(start, min(N, start + MC_CHUNK))
        inc = driver_increments(n, steps, dt, seed, idx)
        sig = sig_fold(inc, q_max)
        if richardson:
            coarse = inc[:, 0::2, :] + inc[:, 1::2, :]
            sig = 2.0 * sig - sig_fold(coarse, q_max)
        # pairwise (Chan) merge of chunk moments
        nb = sig.shape[0]
        mb = sig.mean(axis=0)
        m2b = ((sig - mb) ** 2).sum(axis=0)
        if mean is None:
            count, mean, m2 = nb, mb, m2b
        else:
            delta = mb - mean
            tot = count + nb
            mean = mean + delta * (nb / tot)
            m2 = m2 + m2b + delta * delta * (count * nb / tot)
            count = tot
    if N > 1:
        se = np.sqrt(m2 / (N - 1) / N)
    else:
        se = np.full_like(mean, np.inf)
    return TruncTensor(n + 1, q_max, mean), TruncTensor(n + 1, q_max, se)


__all__ = [
    "expected_signature_bm_time",
    "mc_expected_signature",
    "brownian_increments",
    "driver_increments",
    "num_grid_steps",
]
