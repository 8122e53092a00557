"""Reference implementations that share no code with the package.

They work on plain dicts {word tuple: float} and favour directness over speed.
"""
import itertools
from collections import Counter
from fractions import Fraction
from math import factorial

import numpy as np


def words_upto(width, level):
    out = []
    for k in range(level + 1):
        out.extend(itertools.product(range(width), repeat=k))
    return out


def shuffle_recursive(I, J):
    """I ⧢ J from the recursive definition (u a) ⧢ (v b) = (u ⧢ vb) a + (ua ⧢ v) b."""
    I, J = tuple(I), tuple(J)
    if not I:
        return Counter({J: 1})
    if not J:
        return Counter({I: 1})
    out = Counter()
    for w, c in shuffle_recursive(I[:-1], J).items():
        out[w + I[-1:]] += c
    for w, c in shuffle_recursive(I, J[:-1]).items():
        out[w + J[-1:]] += c
    return out


def dict_concat(a, b, level):
    out = {}
    for u, x in a.items():
        for v, y in b.items():
            if len(u) + len(v) <= level:
                out[u + v] = out.get(u + v, 0.0) + x * y
    return out


def segment_sig_dict(delta, level):
    width = len(delta)
    return {w: float(np.prod([delta[a] for a in w])) / factorial(len(w))
            for w in words_upto(width, level)}


def signature_dict(values, level):
    """Signature of the piecewise-linear path through ``values`` (L+1, dim) by dict Chen products."""
    values = np.asarray(values, dtype=float)
    sig = {(): 1.0}
    for k in range(len(values) - 1):
        sig = dict_concat(sig, segment_sig_dict(values[k + 1] - values[k], level), level)
    return sig


def iterated_integral_quadrature(values, word, sub=64):
    """Iterated integral of one word by nested left-point sums on a refined grid.

    Converges at O(1/sub); used for low levels only.
    """
    values = np.asarray(values, dtype=float)
    pts = [values[0]]
    for k in range(len(values) - 1):
        for s in range(1, sub + 1):
            pts.append(values[k] + (values[k + 1] - values[k]) * s / sub)
    pts = np.array(pts)
    inc = np.diff(pts, axis=0)
    acc = np.ones(len(inc) + 1)
    for a in word:
        # acc_t <- int_0^t acc_u dX^a_u, left-point rule
        new = np.zeros_like(acc)
        new[1:] = np.cumsum(acc[:-1] * inc[:, a])
        acc = new
    return acc[-1]


def expected_sig_factorization(n, T, word):
    """E[S(t, W)^word] as the sum over factorizations into blocks (0) and (i,i).

    A factorization with blocks b_1..b_k contributes prod(weights) / k!,
    weight T for (0) and T/2 for (i,i).
    """
    word = tuple(word)
    total = Fraction(0)

    def rec(pos, weight, blocks):
        nonlocal total
        if pos == len(word):
            total += weight / factorial(blocks)
            return
        if word[pos] == 0:
            rec(pos + 1, weight * Fraction(T), blocks + 1)
        elif pos + 1 < len(word) and word[pos + 1] == word[pos]:
            rec(pos + 2, weight * Fraction(T) / 2, blocks + 1)

    rec(0, Fraction(1), 0)
    return float(total)
