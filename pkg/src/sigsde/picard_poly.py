"""Picard iterates of linear signature SDEs as polynomials in the parameters.

For a driver X and parameters theta, the level-I coefficient of the r-th
Picard iterate is

    Y(r)^I_{0,t} = sum_{|J| <= Q(r, |I|)} alpha^I_{r,J}(theta) X^J_{0,t},

with alpha given by a recursion over (r, I, J).  Unknown parameters become
polynomial variables; known ones are folded into the coefficients.
``numeric_picard`` evaluates the same iterates by quadrature and serves as
the independent check.
"""
from functools import lru_cache
from itertools import combinations
from weakref import WeakKeyDictionary

import numpy as np

from .kernels import lifted_increment_numpy
from .mpoly import PRUNE_TOL, MPoly
from .shuffle_algebra import TruncTensor, check_word, level_offsets


class ConvergenceError(RuntimeError):
    """Quadrature refinement did not settle within the allowed number of halvings."""


def q_bound(r, ell):
    """Degree / word-length bound Q(r, ell)."""
    if r < 0 or ell < 0:
        raise ValueError("r and ell must be non-negative")
    if r == 0 or ell == 0:
        return 0
    if ell == 1:
        return 2 ** (r - 1)
    return 2 ** r - 1


@lru_cache(maxsize=None)
def _splits(n_body, max_l, max_k):
    """Position subsets L of range(n_body) (and complements K) within the length windows."""
    out = []
    for size_l in range(max(0, n_body - max_k), min(n_body, max_l) + 1):
        for pos in combinations(range(n_body), size_l):
            rest = tuple(p for p in range(n_body) if p not in pos)
            out.append((pos, rest))
    return tuple(out)


class PicardPolynomials:
    """Memoised table of alpha^I_{r,J} for one parameter matrix.

    In symbolic mode (unknowns present, no ``values``) coefficients are
    MPoly in the unknowns; otherwise they are plain floats evaluated at the
    bound parameters.  Both modes run the same recursion.
    """

    def __init__(self, theta, values=None):
        self.theta = theta
        self.symbolic = theta.num_unknowns > 0 and values is None
        self.values = None if values is None else np.asarray(values, dtype=float)
        self.nvars = theta.num_unknowns if self.symbolic else 0
        self._memo = {}
        # theta_{i,j}^K for every row including the fixed time row
        self._terms = {}
        for i in range(theta.m + 1):
            for j in range(theta.n + 1):
                if i == 0:
                    self._terms[i, j] = [((), self._one())] if j == 0 else []
                    continue
                terms = []
                for K in theta.support(i, j):
                    if self.symbolic:
                        c = theta.symbolic(i, j, K)
                    else:
                        c = theta.numeric(i, j, K, self.values)
                    if c:
                        terms.append((K, c))
                self._terms[i, j] = terms

    def _zero(self):
        return MPoly(self.nvars) if self.symbolic else 0.0

    def _one(self):
        return MPoly.const(self.nvars, 1.0) if self.symbolic else 1.0

    def _acc(self, acc, x):
        if self.symbolic:
            return acc.iadd_scaled(x, 1.0)
        return acc + x

    def _finish(self, acc):
        return acc.prune(PRUNE_TOL) if self.symbolic else acc

    def cache_size(self):
        return len(self._memo)

    def clear(self):
        self._memo.clear()

    def alpha(self, r, I, J):
        I = check_word(I, self.theta.width)
        J = check_word(J, self.theta.n + 1)
        if len(I) > self.theta.q:
            raise ValueError(f"|I| = {len(I)} exceeds q = {self.theta.q}")
        if len(J) > q_bound(r, len(I)):
            raise ValueError(f"|J| = {len(J)} exceeds Q({r}, {len(I)}) = {q_bound(r, len(I))}")
        return self._alpha(r, I, J)

    def _alpha(self, r, I, J):
        key = (r, I, J)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        if not I:
            val = self._one() if not J else self._zero()
        elif r == 0 or not J:
            val = self._zero()
        elif len(I) == 1:
            val = self._level_one(r, I[0], J)
        else:
            val = self._higher(r, I, J)
        self._memo[key] = val
        return val

    def _level_one(self, r, i, J):
        acc = self._zero()
        if len(J) > q_bound(r - 1, self.theta.q) + 1:
            return acc
        head, jf = J[:-1], J[-1]
        for K, c in self._terms[i, jf]:
            if len(head) <= q_bound(r - 1, len(K)):
                a = self._alpha(r - 1, K, head)
                if a:
                    acc = self._acc(acc, c * a)
        return self._finish(acc)

    def _higher(self, r, I, J):
        acc = self._zero()
        max_l = q_bound(r - 1, len(I) - 1)
        max_k = q_bound(r, 1) - 1
        if len(J) > max_l + max_k + 1:
            return acc
        head_word, tail_letter = I[:-1], I[-1:]
        body, jf = J[:-1], (J[-1],)
        get = body.__getitem__
        memo = self._memo
        # each subset of body positions is one (L, K) split with body in L ⧢ K
        for idx_l, idx_k in _splits(len(body), max_l, max_k):
            L = tuple(map(get, idx_l))
            a = memo.get((r - 1, head_word, L))
            if a is None:
                a = self._alpha(r - 1, head_word, L)
            if not a:
                continue
            K = tuple(map(get, idx_k)) + jf
            b = memo.get((r, tail_letter, K))
            if b is None:
                b = self._alpha(r, tail_letter, K)
            if b:
                acc = self._acc(acc, a * b)
        return self._finish(acc)

    def moment_poly(self, r, I, moments):
        """P_r^I = sum_J alpha^I_{r,J} E[X^J] for expected driver signature ``moments``."""
        I = check_word(I, self.theta.width)
        need = q_bound(r, len(I))
        if moments.width != self.theta.n + 1:
            raise ValueError("moments live over the wrong driver alphabet")
        if moments.level < need:
            raise ValueError(f"moments truncated at level {moments.level}; need {need}")
        acc = self._zero()
        for J, mJ in moments.items(nonzero=True):
            if len(J) > need:
                break
            a = self.alpha(r, I, J)
            if a:
                if self.symbolic:
                    acc.iadd_scaled(a, mJ)
                else:
                    acc += a * mJ
        if self.symbolic:
            scale = max((abs(c) for c in acc.terms.values()), default=0.0)
            return acc.prune(PRUNE_TOL * scale)
        return acc

    def evaluate_on_signature(self, r, I, sig):
        """sum_J alpha^I_{r,J} sig^J for a driver signature ``sig``."""
        return self.moment_poly(r, I, sig)


_tables = WeakKeyDictionary()


def picard_table(theta, values=None):
    """Shared symbolic table per Theta object (numeric tables are not cached)."""
    if values is not None or theta.num_unknowns == 0:
        return PicardPolynomials(theta, values)
    table = _tables.get(theta)
    if table is None:
        table = _tables[theta] = PicardPolynomials(theta)
    return table


def alpha(r, I, J, theta, values=None):
    return picard_table(theta, values).alpha(r, tuple(I), tuple(J))


def moment_poly(r, I, theta, moments, values=None):
    return picard_table(theta, values).moment_poly(r, tuple(I), moments)


def _picard_sweep(mat, dx_fine, r_max, width, level, offs):
    """Picard iterates at the fine nodes by cumulative trapezoid; returns Y(r)_T for r <= r_max."""
    P = dx_fine.shape[0] + 1
    D = offs[-1]
    Y = np.zeros((P, D))
    Y[:, 0] = 1.0
    finals = [Y[-1].copy()]
    for _ in range(r_max):
        left = lifted_increment_numpy(Y[:-1], mat, dx_fine, width, level, offs)
        right = lifted_increment_numpy(Y[1:], mat, dx_fine, width, level, offs)
        new = np.empty_like(Y)
        new[0] = 0.0
        np.cumsum(0.5 * (left + right), axis=0, out=new[1:])
        new[:, 0] += 1.0
        Y = new
        finals.append(Y[-1].copy())
    return np.array(finals)


def numeric_picard_iterates(theta, X, r_max, values=None, tol=1e-9, max_halvings=14):
    """Y(0)_{0,T}, ..., Y(r_max)_{0,T} by trapezoid quadrature with Romberg refinement.

    ``X`` is the time-augmented piecewise-linear driver.  Each segment is split
    into 2^k sub-steps; successive Romberg diagonals must agree to
    ``tol * (1 + max|Y|)`` or ConvergenceError is raised.
    """
    if X.dim != theta.n + 1:
        raise ValueError(f"driver must have {theta.n + 1} coordinates (time first)")
    mat = theta.bind(values)
    width, level = theta.width, theta.q
    offs = level_offsets(width, level)
    inc = X.increments()
    rows = []
    prev_diag = None
    for k in range(max_halvings + 1):
        M = 2 ** k
        dx_fine = np.repeat(inc / M, M, axis=0)
        row = [_picard_sweep(mat, dx_fine, r_max, width, level, offs)]
        for j in range(1, k + 1):
            row.append(row[j - 1] + (row[j - 1] - rows[k - 1][j - 1]) / (4 ** j - 1))
        rows.append(row)
        diag = row[-1]
        if prev_diag is not None:
            err = np.abs(diag - prev_diag).max()
            if err <= tol * (1.0 + np.abs(diag).max()):
                return [TruncTensor(width, level, d) for d in diag]
        prev_diag = diag
    raise ConvergenceError(
        f"Picard quadrature did not converge to {tol} after {max_halvings} halvings")


def numeric_picard(theta, X, r, values=None, tol=1e-9):
    """Y(r)_{0,T} for the driver X, computed by quadrature."""
    if r == 0:
        return TruncTensor.unit(theta.width, theta.q)
    return numeric_picard_iterates(theta, X, r, values, tol)[r]
