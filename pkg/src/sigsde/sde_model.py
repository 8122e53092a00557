"""Linear signature SDEs: parametrised vector fields, the lifted field and simulation.

The solution path is (t, Y^1, ..., Y^m); coordinate 0 is time.  The drift of
row i is <theta_{i,0}, S> and the diffusion against W^j is <theta_{i,j}, S>,
where S is the truncated signature of the solution.  Row 0 is fixed to
(1, 0, ..., 0).

Parameters are affine in a vector of unknowns: each coefficient
theta_{i,j}^K = const + sum_k lin_k * u_k.  A plain unknown slot is the
special case of a single unit ``lin`` entry.
"""
import logging
from dataclasses import dataclass

import numpy as np

from . import kernels
from .driving_moments import driver_increments, num_grid_steps
from .mpoly import MPoly
from .shuffle_algebra import (
    TruncTensor,
    check_word,
    enumerate_words,
    level_offsets,
    tensor_dim,
    word_index,
)
from .signatures import PiecewiseLinearPath

log = logging.getLogger(__name__)

DEFAULT_NORM_CAP = 1e6


class UnboundParameterError(ValueError):
    """Numeric evaluation requested while unknowns have no values."""


class Theta:
    """Parameter matrix (theta_{i,j}) for i in 1..m, j in 0..n, entries in T^(<=q)(R^{m+1})."""

    def __init__(self, m, n, q, num_unknowns=0):
        if m < 1 or n < 0 or q < 0:
            raise ValueError("need m >= 1, n >= 0, q >= 0")
        self.m, self.n, self.q = int(m), int(n), int(q)
        D = tensor_dim(self.m + 1, self.q)
        if num_unknowns > D:
            raise ValueError(f"{num_unknowns} unknowns exceed dim T^(<={q}) = {D}")
        self.num_unknowns = int(num_unknowns)
        self.const = np.zeros((self.m, self.n + 1, D))
        self.lin = np.zeros((self.m, self.n + 1, D, self.num_unknowns))

    @property
    def width(self):
        return self.m + 1

    @property
    def dim(self):
        return self.const.shape[2]

    def _slot(self, i, j, word):
        if not 1 <= i <= self.m:
            raise ValueError(f"row {i} outside 1..{self.m}")
        if not 0 <= j <= self.n:
            raise ValueError(f"column {j} outside 0..{self.n}")
        word = check_word(word, self.width)
        if len(word) > self.q:
            raise ValueError(f"word {word} longer than q={self.q}")
        return i - 1, j, word_index(word, self.width)

    def set_known(self, i, j, word, value):
        a, b, c = self._slot(i, j, word)
        self.const[a, b, c] = value
        return self

    def add_term(self, i, j, word, coef=1.0, unknown=None):
        """Add coef (or coef * u_unknown, 0-based) to theta_{i,j}^word."""
        a, b, c = self._slot(i, j, word)
        if unknown is None:
            self.const[a, b, c] += coef
        else:
            if not 0 <= unknown < self.num_unknowns:
                raise ValueError(f"unknown index {unknown} outside 0..{self.num_unknowns - 1}")
            self.lin[a, b, c, unknown] += coef
        return self

    @classmethod
    def from_mask(cls, m, n, q, known, mask):
        """Known entries {(i, j, word): value} plus a list of unknown slots.

        The k-th mask entry becomes unknown k.
        """
        theta = cls(m, n, q, num_unknowns=len(mask))
        for (i, j, word), value in known.items():
            theta.set_known(i, j, word, value)
        seen = set()
        for k, (i, j, word) in enumerate(mask):
            slot = theta._slot(i, j, word)
            if slot in seen:
                raise ValueError(f"slot {(i, j, word)} masked twice")
            seen.add(slot)
            theta.const[slot] = 0.0
            theta.lin[slot + (k,)] = 1.0
        return theta

    def bind(self, values=None):
        """Numeric parameter array of shape (m, n+1, D)."""
        if self.num_unknowns == 0:
            return self.const.copy()
        if values is None:
            raise UnboundParameterError(f"{self.num_unknowns} unknowns are unbound")
        values = np.asarray(values, dtype=float)
        if values.shape != (self.num_unknowns,):
            raise UnboundParameterError(
                f"expected {self.num_unknowns} parameter values, got shape {values.shape}")
        return self.const + self.lin @ values

    def bound(self, values=None):
        """Fully known copy with the unknowns substituted."""
        out = Theta(self.m, self.n, self.q)
        out.const = self.bind(values)
        return out

    def row0(self, j, word):
        """theta_{0,j}^I: 1 for (j, I) = (0, empty), else 0."""
        return 1.0 if (j == 0 and len(word) == 0) else 0.0

    def support(self, i, j):
        """Words K where theta_{i,j}^K is not identically zero (i >= 1)."""
        nz = (self.const[i - 1, j] != 0.0) | (self.lin[i - 1, j] != 0.0).any(axis=-1)
        words = enumerate_words(self.width, self.q)
        return [words[k] for k in np.flatnonzero(nz)]

    def symbolic(self, i, j, word):
        """theta_{i,j}^word as an affine MPoly in the unknowns (row 0 included)."""
        if i == 0:
            return MPoly.const(self.num_unknowns, self.row0(j, word))
        k = word_index(word, self.width)
        return MPoly.affine(self.const[i - 1, j, k], self.lin[i - 1, j, k])

    def numeric(self, i, j, word, values=None):
        if i == 0:
            return self.row0(j, word)
        k = word_index(word, self.width)
        val = self.const[i - 1, j, k]
        if self.num_unknowns:
            if values is None:
                raise UnboundParameterError("unknowns are unbound")
            val = val + self.lin[i - 1, j, k] @ np.asarray(values, dtype=float)
        return float(val)

    def diffusion_unknowns(self):
        """Unknowns that only enter diffusion columns (j >= 1)."""
        used_drift = (self.lin[:, 0] != 0.0).any(axis=(0, 1))
        used_diff = (self.lin[:, 1:] != 0.0).any(axis=(0, 1, 2))
        return [k for k in range(self.num_unknowns) if used_diff[k] and not used_drift[k]]


def _check_state(theta, s):
    if (s.width, s.level) != (theta.width, theta.q):
        raise ValueError("state does not match the solution tensor algebra of theta")


def eval_F(theta, s, values=None):
    """Matrix F_theta(s) of shape (m+1, n+1)."""
    _check_state(theta, s)
    mat = theta.bind(values)
    F = np.zeros((theta.m + 1, theta.n + 1))
    F[0, 0] = 1.0
    F[1:] = mat @ s.coeffs
    return F


def lifted_apply(theta, s, dx, values=None):
    """tens(s)(F_theta(s) dx): word (I^-, i) receives s^{I^-} v_i."""
    _check_state(theta, s)
    dx = np.asarray(dx, dtype=float).reshape(1, -1)
    if dx.shape[1] != theta.n + 1:
        raise ValueError(f"dx must have {theta.n + 1} components")
    offs = level_offsets(theta.width, theta.q)
    inc = kernels.lifted_increment_numpy(
        s.coeffs[None, :], theta.bind(values), dx, theta.width, theta.q, offs)
    return TruncTensor(theta.width, theta.q, inc[0])


def heun_step(theta, s, dx, values=None):
    """Stratonovich Heun predictor-corrector step of the lifted SDE."""
    k1 = lifted_apply(theta, s, dx, values)
    k2 = lifted_apply(theta, s + k1, dx, values)
    return s + (k1 + k2) * 0.5


def midpoint_step(theta, s, dx, values=None):
    """Explicit Stratonovich midpoint step."""
    k1 = lifted_apply(theta, s, dx, values)
    return s + lifted_apply(theta, s + k1 * 0.5, dx, values)


@dataclass
class Trajectory:
    """One simulated solution: grid, lifted states (L+1, D) and level-1 path (L+1, m+1)."""

    grid: np.ndarray
    states: np.ndarray
    path: np.ndarray
    width: int
    level: int
    aborted: bool = False

    def state(self, k):
        return TruncTensor(self.width, self.level, self.states[k])

    def as_path(self):
        return PiecewiseLinearPath(self.grid, self.path)


@dataclass
class SampleBatch:
    """N trajectories on a common grid (lifted states kept only at T)."""

    grid: np.ndarray
    paths: np.ndarray
    final_states: np.ndarray
    aborted: np.ndarray

    @property
    def num_aborted(self):
        return int(self.aborted.sum())

    def good_paths(self):
        return self.paths[~self.aborted]


def _scheme_code(scheme):
    try:
        return kernels.SCHEMES[scheme]
    except KeyError:
        raise ValueError(f"unknown scheme {scheme!r}; use one of {sorted(kernels.SCHEMES)}") from None


def simulate_driven(theta, dx, values=None, scheme="heun", cap=DEFAULT_NORM_CAP,
                    keep_states=False):
    """Run the lifted scheme along given driver increments dx (B, L, n+1)."""
    return kernels.lifted_simulate(theta.bind(values), np.asarray(dx, dtype=float), theta.q,
                                   _scheme_code(scheme), cap, keep_states)


def simulate(theta, T, dt, seed, values=None, index=0, trial=None, scheme="heun",
             cap=DEFAULT_NORM_CAP):
    """Simulate one trajectory from Y_0 = 1 on the uniform dt grid of [0, T]."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    steps = num_grid_steps(T, dt)
    dx = driver_increments(theta.n, steps, dt, seed, [index], trial)
    paths, _, aborted, states = simulate_driven(theta, dx, values, scheme, cap, keep_states=True)
    if aborted[0]:
        log.warning("trajectory %s aborted: state norm exceeded %g", index, cap)
    return Trajectory(np.arange(steps + 1) * dt, states[0], paths[0], theta.width, theta.q,
                      bool(aborted[0]))


def simulate_batch(theta, T, dt, N, seed, values=None, trial=None, scheme="heun",
                   cap=DEFAULT_NORM_CAP, start=0):
    """Simulate trajectories start..start+N-1 of the (seed, trial) family."""
    steps = num_grid_steps(T, dt)
    dx = driver_increments(theta.n, steps, dt, seed, range(start, start + N), trial)
    paths, final, aborted, _ = simulate_driven(theta, dx, values, scheme, cap)
    if aborted.any():
        log.warning("%d of %d trajectories aborted (state norm > %g)", aborted.sum(), N, cap)
    return SampleBatch(np.arange(steps + 1) * dt, paths, final, aborted)
