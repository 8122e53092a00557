"""Words, the truncated tensor algebra and the shuffle product.

Words are plain tuples of non-negative ints.  A truncated tensor over an
alphabet of ``width`` letters up to ``level`` is stored as a flat float64
vector whose coordinates follow the canonical (length, lexicographic) word
order; ``word_index`` maps a word to its slot.
"""
from collections import Counter
from functools import lru_cache
from itertools import combinations, product
from math import comb, factorial

import numpy as np

EMPTY = ()


def tensor_dim(width, level):
    """Number of words of length <= level over ``width`` letters."""
    return sum(width ** k for k in range(level + 1))


@lru_cache(maxsize=None)
def level_offsets(width, level):
    """Start offset of every level block, plus the total size as last entry."""
    offs = [0]
    for k in range(level + 1):
        offs.append(offs[-1] + width ** k)
    return tuple(offs)


def word_index(word, width):
    idx = 0
    for letter in word:
        idx = idx * width + letter
    return level_offsets(width, len(word))[len(word)] + idx


@lru_cache(maxsize=None)
def _words(width, max_len):
    out = []
    for k in range(max_len + 1):
        out.extend(product(range(width), repeat=k))
    return tuple(out)


def enumerate_words(alphabet_size, max_len):
    """All words of length <= max_len, sorted by (length, lexicographic)."""
    if alphabet_size < 1 or max_len < 0:
        raise ValueError("alphabet_size must be >= 1 and max_len >= 0")
    return list(_words(alphabet_size, max_len))


def check_word(word, width):
    word = tuple(int(a) for a in word)
    for a in word:
        if a < 0 or a >= width:
            raise ValueError(f"letter {a} outside alphabet of size {width}")
    return word


def prefix(word):
    """I^- : every letter but the last."""
    return word[:-1]


def last(word):
    """I^f : the final letter, as an int."""
    return word[-1]


def format_word(word):
    return "e" if len(word) == 0 else ".".join(str(a) for a in word)


def parse_word(text):
    text = str(text).strip()
    if text in ("e", "", "()"):
        return EMPTY
    try:
        word = tuple(int(tok) for tok in text.split("."))
    except ValueError:
        raise ValueError(f"cannot parse word {text!r}") from None
    if any(a < 0 for a in word):
        raise ValueError(f"negative letter in word {text!r}")
    return word


@lru_cache(maxsize=65536)
def _shuffle_cached(a, b):
    n = len(a) + len(b)
    out = Counter()
    for pos in combinations(range(n), len(a)):
        w = [0] * n
        ia = ib = 0
        chosen = set(pos)
        for k in range(n):
            if k in chosen:
                w[k] = a[ia]
                ia += 1
            else:
                w[k] = b[ib]
                ib += 1
        out[tuple(w)] += 1
    return tuple(out.items())


def shuffle(I, J):
    """Shuffle product I ⧢ J as a word -> multiplicity Counter."""
    return Counter(dict(_shuffle_cached(tuple(I), tuple(J))))


def shuffle_items(I, J):
    """Same as ``shuffle`` but returns the cached (word, multiplicity) tuple."""
    return _shuffle_cached(tuple(I), tuple(J))


class TruncTensor:
    """Element of the truncated tensor algebra T^(<=level)(R^width)."""

    __slots__ = ("width", "level", "coeffs")

    def __init__(self, width, level, coeffs=None):
        if width < 1 or level < 0:
            raise ValueError("width must be >= 1 and level >= 0")
        self.width = int(width)
        self.level = int(level)
        size = tensor_dim(self.width, self.level)
        if coeffs is None:
            coeffs = np.zeros(size)
        else:
            coeffs = np.array(coeffs, dtype=float)
            if coeffs.shape != (size,):
                raise ValueError(f"expected {size} coefficients, got shape {coeffs.shape}")
        self.coeffs = coeffs

    @classmethod
    def zero(cls, width, level):
        return cls(width, level)

    @classmethod
    def unit(cls, width, level):
        t = cls(width, level)
        t.coeffs[0] = 1.0
        return t

    @classmethod
    def from_dict(cls, width, level, mapping):
        t = cls(width, level)
        for word, value in mapping.items():
            t[word] = value
        return t

    def _index(self, word):
        word = check_word(word, self.width)
        if len(word) > self.level:
            raise KeyError(f"word {word} longer than truncation level {self.level}")
        return word_index(word, self.width)

    def __getitem__(self, word):
        return float(self.coeffs[self._index(word)])

    def __setitem__(self, word, value):
        self.coeffs[self._index(word)] = value

    def get(self, word, default=0.0):
        if len(word) > self.level:
            return default
        return self[word]

    def block(self, k):
        """Level-k coefficients as an array of shape (width,)*k (a view)."""
        offs = level_offsets(self.width, self.level)
        return self.coeffs[offs[k]:offs[k + 1]].reshape((self.width,) * k)

    def words(self):
        return enumerate_words(self.width, self.level)

    def items(self, nonzero=False):
        for word, c in zip(_words(self.width, self.level), self.coeffs):
            if not nonzero or c != 0.0:
                yield word, float(c)

    def to_dict(self, nonzero=True):
        return dict(self.items(nonzero=nonzero))

    def copy(self):
        return TruncTensor(self.width, self.level, self.coeffs.copy())

    def _check_compatible(self, other):
        if (self.width, self.level) != (other.width, other.level):
            raise ValueError("tensors live in different truncated algebras")

    def __add__(self, other):
        self._check_compatible(other)
        return TruncTensor(self.width, self.level, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check_compatible(other)
        return TruncTensor(self.width, self.level, self.coeffs - other.coeffs)

    def __neg__(self):
        return TruncTensor(self.width, self.level, -self.coeffs)

    def __mul__(self, scalar):
        return TruncTensor(self.width, self.level, self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return TruncTensor(self.width, self.level, self.coeffs / float(scalar))

    def __matmul__(self, other):
        return concat_mul(self, other)

    def dot(self, other):
        self._check_compatible(other)
        return float(self.coeffs @ other.coeffs)

    def allclose(self, other, rtol=1e-12, atol=1e-12):
        self._check_compatible(other)
        return bool(np.allclose(self.coeffs, other.coeffs, rtol=rtol, atol=atol))

    def __repr__(self):
        nz = ", ".join(f"{format_word(w)}: {c:.6g}" for w, c in self.items(nonzero=True))
        return f"TruncTensor(width={self.width}, level={self.level}, {{{nz}}})"

    def to_csv(self, nonzero=False):
        """Rows ``word;coefficient`` with words like ``0.1.1`` (``e`` = empty)."""
        lines = [f"{format_word(w)};{c!r}" for w, c in self.items(nonzero=nonzero)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text, width, level):
        t = cls(width, level)
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("word"):
                continue
            w, c = line.split(";")
            t[parse_word(w)] = float(c)
        return t


def concat_mul_flat(a, b, width, level):
    """Truncated tensor product of flat coefficient arrays (leading batch dims ok)."""
    offs = level_offsets(width, level)
    batch = a.shape[:-1]
    out = np.zeros(np.broadcast_shapes(a.shape, b.shape))
    for k in range(level + 1):
        acc = out[..., offs[k]:offs[k + 1]]
        for i in range(k + 1):
            ai = a[..., offs[i]:offs[i + 1]]
            bj = b[..., offs[k - i]:offs[k - i + 1]]
            acc += (ai[..., :, None] * bj[..., None, :]).reshape(batch + (-1,))
    return out


def concat_mul(s, t):
    """(s ⊗ t)^K = sum over splits K = (K1, K2) of s^K1 t^K2, truncated."""
    s._check_compatible(t)
    return TruncTensor(s.width, s.level, concat_mul_flat(s.coeffs, t.coeffs, s.width, s.level))


def trunc_exp(a):
    """Tensor exponential of an element with zero scalar part."""
    if a.coeffs[0] != 0.0:
        raise ValueError("trunc_exp needs a tensor with zero scalar (empty-word) part")
    result = TruncTensor.unit(a.width, a.level)
    term = TruncTensor.unit(a.width, a.level)
    for k in range(1, a.level + 1):
        term = concat_mul(term, a) / k
        result = result + term
    return result


def shuffle_count(I, J):
    """Binomial count |I ⧢ J| with multiplicity."""
    return comb(len(I) + len(J), len(I))


def segment_coefficient(word, increment):
    """Coefficient of ``word`` in exp(increment): prod of letters / |word|!."""
    val = 1.0
    for a in word:
        val *= increment[a]
    return val / factorial(len(word))
