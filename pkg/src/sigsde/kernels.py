"""Hot loops: batched signature folds and lifted-SDE time stepping.

Every kernel has a numba version (one trajectory per outer loop iteration,
flat index arithmetic) and a numpy version vectorised over the batch axis.
``sig_fold`` and ``lifted_simulate`` dispatch on ``_backend.USE_NUMBA``;
the ``*_numpy`` / ``*_numba`` functions stay importable for benchmarks and
cross-checks.
"""
import numpy as np

from . import _backend
from ._backend import njit, pnjit, prange
from .shuffle_algebra import level_offsets

HEUN = 0
MIDPOINT = 1
SCHEMES = {"heun": HEUN, "midpoint": MIDPOINT}


# ---------------------------------------------------------------- signatures

def _horner_update_numpy(S, delta, width, level, offs):
    """S <- S ⊗ exp(delta) in place, S of shape (B, D), delta (B, width)."""
    B = S.shape[0]
    for k in range(level, 0, -1):
        t = S[:, 0:1] * delta / k
        for i in range(1, k):
            t = t + S[:, offs[i]:offs[i + 1]]
            t = (t[:, :, None] * delta[:, None, :]).reshape(B, -1) / (k - i)
        S[:, offs[k]:offs[k + 1]] += t


def sig_fold_numpy(increments, level, init=None):
    """Signatures of piecewise-linear paths given their increments (B, L, w)."""
    B, L, width = increments.shape
    offs = level_offsets(width, level)
    if init is None:
        S = np.zeros((B, offs[-1]))
        S[:, 0] = 1.0
    else:
        S = np.array(init, dtype=float, copy=True)
    for j in range(L):
        _horner_update_numpy(S, increments[:, j, :], width, level, offs)
    return S


@njit
def _horner_update_one(S, delta, width, level, offs, t, t2):
    for k in range(level, 0, -1):
        # t holds a level-i block; start at level 1
        for a in range(width):
            t[a] = S[0] * delta[a] / k
        size = width
        for i in range(1, k):
            base = offs[i]
            for p in range(size):
                t[p] += S[base + p]
            c = 1.0 / (k - i)
            for p in range(size):
                tp = t[p] * c
                for a in range(width):
                    t2[p * width + a] = tp * delta[a]
            size *= width
            for p in range(size):
                t[p] = t2[p]
        base = offs[k]
        for p in range(size):
            S[base + p] += t[p]


@pnjit
def _sig_fold_kernel(increments, level, offs, out):
    B, L, width = increments.shape
    top = width ** level
    for b in prange(B):
        t = np.empty(top)
        t2 = np.empty(top)
        S = out[b]
        for j in range(L):
            _horner_update_one(S, increments[b, j], width, level, offs, t, t2)


def sig_fold_numba(increments, level, init=None):
    increments = np.ascontiguousarray(increments, dtype=np.float64)
    B, L, width = increments.shape
    offs = np.array(level_offsets(width, level), dtype=np.int64)
    if init is None:
        out = np.zeros((B, offs[-1]))
        out[:, 0] = 1.0
    else:
        out = np.array(init, dtype=np.float64, copy=True)
    _sig_fold_kernel(increments, level, offs, out)
    return out


def sig_fold(increments, level, init=None):
    if _backend.USE_NUMBA:
        return sig_fold_numba(increments, level, init)
    return sig_fold_numpy(increments, level, init)


# ---------------------------------------------------- lifted vector field

def lifted_increment_numpy(S, theta_mat, dx, width, level, offs):
    """tens(S) applied to F_theta(S) dx, batched: S (B, D), dx (B, n+1)."""
    B = S.shape[0]
    F = np.einsum("ijd,bd->bij", theta_mat, S)
    v = np.empty((B, width))
    v[:, 0] = dx[:, 0]
    v[:, 1:] = np.einsum("bij,bj->bi", F, dx)
    inc = np.zeros_like(S)
    inc[:, offs[1]:offs[2]] = S[:, 0:1] * v
    for k in range(2, level + 1):
        prev = S[:, offs[k - 1]:offs[k]]
        inc[:, offs[k]:offs[k + 1]] = (prev[:, :, None] * v[:, None, :]).reshape(B, -1)
    return inc


def lifted_simulate_numpy(theta_mat, dx, level, scheme=HEUN, cap=1e6, keep_states=False):
    """Integrate dS = tens(S) F(S) dX from S = 1 for a batch of drivers.

    ``theta_mat`` has shape (m, n+1, D); ``dx`` has shape (B, L, n+1).
    Returns (paths (B, L+1, m+1), final states (B, D), aborted (B,), states).
    Trajectories whose state exceeds ``cap`` in sup-norm (or goes non-finite)
    are frozen at their last good state and flagged.
    """
    m = theta_mat.shape[0]
    width = m + 1
    B, L, _ = dx.shape
    offs = level_offsets(width, level)
    S = np.zeros((B, offs[-1]))
    S[:, 0] = 1.0
    paths = np.zeros((B, L + 1, width))
    aborted = np.zeros(B, dtype=bool)
    states = np.zeros((B, L + 1, offs[-1])) if keep_states else None
    if keep_states:
        states[:, 0] = S
    with np.errstate(over="ignore", invalid="ignore"):
        for j in range(L):
            d = dx[:, j, :]
            k1 = lifted_increment_numpy(S, theta_mat, d, width, level, offs)
            if scheme == HEUN:
                k2 = lifted_increment_numpy(S + k1, theta_mat, d, width, level, offs)
                new = S + 0.5 * (k1 + k2)
            else:
                new = S + lifted_increment_numpy(S + 0.5 * k1, theta_mat, d, width, level, offs)
            bad = ~np.isfinite(new).all(axis=1) | (np.abs(new).max(axis=1) > cap)
            aborted |= bad
            S = np.where(aborted[:, None], S, new)
            paths[:, j + 1] = S[:, offs[1]:offs[2]]
            if keep_states:
                states[:, j + 1] = S
    return paths, S, aborted, states


@njit
def _lifted_inc_one(S, theta_mat, d, width, level, offs, v, out):
    m = theta_mat.shape[0]
    ncol = theta_mat.shape[1]
    D = S.shape[0]
    v[0] = d[0]
    for i in range(m):
        acc = 0.0
        for j in range(ncol):
            if d[j] == 0.0:
                continue
            f = 0.0
            row = theta_mat[i, j]
            for p in range(D):
                f += row[p] * S[p]
            acc += f * d[j]
        v[i + 1] = acc
    out[0] = 0.0
    for a in range(width):
        out[offs[1] + a] = S[0] * v[a]
    for k in range(2, level + 1):
        src = offs[k - 1]
        dst = offs[k]
        size = offs[k] - offs[k - 1]
        for p in range(size):
            sp = S[src + p]
            for a in range(width):
                out[dst + p * width + a] = sp * v[a]


@pnjit
def _lifted_sim_kernel(theta_mat, dx, level, offs, scheme, cap, paths, final, aborted,
                       states, keep):
    B, L, _ = dx.shape
    m = theta_mat.shape[0]
    width = m + 1
    D = offs[level + 1]
    for b in prange(B):
        S = np.zeros(D)
        tmp = np.zeros(D)
        new = np.zeros(D)
        k1 = np.zeros(D)
        k2 = np.zeros(D)
        v = np.zeros(width)
        S[0] = 1.0
        if keep:
            states[b, 0] = S
        dead = False
        for j in range(L):
            if not dead:
                d = dx[b, j]
                _lifted_inc_one(S, theta_mat, d, width, level, offs, v, k1)
                if scheme == 0:
                    for p in range(D):
                        tmp[p] = S[p] + k1[p]
                    _lifted_inc_one(tmp, theta_mat, d, width, level, offs, v, k2)
                    for p in range(D):
                        new[p] = S[p] + 0.5 * (k1[p] + k2[p])
                else:
                    for p in range(D):
                        tmp[p] = S[p] + 0.5 * k1[p]
                    _lifted_inc_one(tmp, theta_mat, d, width, level, offs, v, k2)
                    for p in range(D):
                        new[p] = S[p] + k2[p]
                for p in range(D):
                    x = new[p]
                    if not np.isfinite(x) or abs(x) > cap:
                        dead = True
                        break
                if not dead:
                    S[:] = new
            for a in range(width):
                paths[b, j + 1, a] = S[offs[1] + a]
            if keep:
                states[b, j + 1] = S
        aborted[b] = dead
        final[b] = S


def lifted_simulate_numba(theta_mat, dx, level, scheme=HEUN, cap=1e6, keep_states=False):
    theta_mat = np.ascontiguousarray(theta_mat, dtype=np.float64)
    dx = np.ascontiguousarray(dx, dtype=np.float64)
    m = theta_mat.shape[0]
    width = m + 1
    B, L, _ = dx.shape
    offs = np.array(level_offsets(width, level), dtype=np.int64)
    D = int(offs[-1])
    paths = np.zeros((B, L + 1, width))
    final = np.zeros((B, D))
    aborted = np.zeros(B, dtype=np.bool_)
    states = np.zeros((B, L + 1, D)) if keep_states else np.zeros((1, 1, D))
    _lifted_sim_kernel(theta_mat, dx, level, offs, int(scheme), float(cap), paths, final,
                       aborted, states, bool(keep_states))
    return paths, final, aborted, (states if keep_states else None)


def lifted_simulate(theta_mat, dx, level, scheme=HEUN, cap=1e6, keep_states=False):
    if _backend.USE_NUMBA:
        return lifted_simulate_numba(theta_mat, dx, level, scheme, cap, keep_states)
    return lifted_simulate_numpy(theta_mat, dx, level, scheme, cap, keep_states)
