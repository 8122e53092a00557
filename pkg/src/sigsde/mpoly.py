"""Sparse multivariate polynomials with float coefficients."""
import numpy as np

PRUNE_TOL = 1e-14


def _var_name(k):
    return f"x{k + 1}"


class MPoly:
    """Polynomial in ``nvars`` variables stored as {exponent tuple: coefficient}.

    Zero coefficients are never stored; arithmetic drops anything whose
    magnitude falls below ``PRUNE_TOL``.
    """

    __slots__ = ("nvars", "terms")

    def __init__(self, nvars, terms=None):
        self.nvars = int(nvars)
        self.terms = {}
        if terms:
            for e, c in terms.items():
                e = tuple(int(a) for a in e)
                if len(e) != self.nvars or any(a < 0 for a in e):
                    raise ValueError(f"bad exponent {e} for {self.nvars} variables")
                c = float(c)
                if c != 0.0:
                    self.terms[e] = self.terms.get(e, 0.0) + c

    @classmethod
    def const(cls, nvars, c):
        p = cls(nvars)
        if c != 0.0:
            p.terms[(0,) * nvars] = float(c)
        return p

    @classmethod
    def var(cls, nvars, k, coef=1.0):
        e = [0] * nvars
        e[k] = 1
        p = cls(nvars)
        if coef != 0.0:
            p.terms[tuple(e)] = float(coef)
        return p

    @classmethod
    def affine(cls, const, lin):
        """const + sum_k lin[k] x_k."""
        lin = np.asarray(lin, dtype=float)
        p = cls.const(len(lin), const)
        for k, c in enumerate(lin):
            if c != 0.0:
                e = [0] * len(lin)
                e[k] = 1
                p.terms[tuple(e)] = float(c)
        return p

    def _new(self, terms):
        p = MPoly.__new__(MPoly)
        p.nvars = self.nvars
        p.terms = terms
        return p

    def copy(self):
        return self._new(dict(self.terms))

    def is_zero(self):
        return not self.terms

    def __bool__(self):
        return bool(self.terms)

    def prune(self, tol=PRUNE_TOL):
        self.terms = {e: c for e, c in self.terms.items() if abs(c) >= tol}
        return self

    @property
    def degree(self):
        """Total degree; -1 for the zero polynomial."""
        return max((sum(e) for e in self.terms), default=-1)

    def _coerce(self, other):
        if isinstance(other, MPoly):
            if other.nvars != self.nvars:
                raise ValueError("polynomials in different numbers of variables")
            return other
        return MPoly.const(self.nvars, float(other))

    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self.terms)
        for e, c in other.terms.items():
            out[e] = out.get(e, 0.0) + c
        return self._new({e: c for e, c in out.items() if abs(c) >= PRUNE_TOL})

    __radd__ = __add__

    def __neg__(self):
        return self._new({e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, MPoly):
            c = float(other)
            if c == 0.0:
                return MPoly(self.nvars)
            return self._new({e: v * c for e, v in self.terms.items() if abs(v * c) >= PRUNE_TOL})
        other = self._coerce(other)
        out = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0.0) + c1 * c2
        return self._new({e: c for e, c in out.items() if abs(c) >= PRUNE_TOL})

    __rmul__ = __mul__

    def iadd_scaled(self, other, scale):
        """self += scale * other, in place (no pruning until ``prune``)."""
        t = self.terms
        for e, c in other.terms.items():
            t[e] = t.get(e, 0.0) + scale * c
        return self

    def deriv(self, k):
        out = {}
        for e, c in self.terms.items():
            if e[k]:
                e2 = list(e)
                e2[k] -= 1
                out[tuple(e2)] = c * e[k]
        return self._new(out)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        total = 0.0
        for e, c in self.terms.items():
            term = c
            for xi, a in zip(x, e):
                if a:
                    term *= xi ** a
            total += term
        return total

    def compiled(self):
        return CompiledPoly.from_mpoly(self)

    def __eq__(self, other):
        if not isinstance(other, MPoly):
            return NotImplemented
        return self.nvars == other.nvars and self.terms == other.terms

    def __repr__(self):
        return f"MPoly({self.nvars}, {self.terms!r})"

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for e in sorted(self.terms, key=lambda e: (-sum(e), tuple(-a for a in e))):
            c = self.terms[e]
            mono = "*".join(
                _var_name(k) + (f"^{a}" if a > 1 else "") for k, a in enumerate(e) if a
            )
            coef = f"{abs(c):.12g}"
            body = coef if not mono else (mono if coef == "1" else f"{coef}*{mono}")
            parts.append(("- " if c < 0 else "+ ") + body)
        text = " ".join(parts)
        return text[2:] if text.startswith("+ ") else "-" + text[2:]

    def to_rows(self):
        """(exponent tuple, coefficient) rows in graded order."""
        return sorted(self.terms.items(), key=lambda kv: (sum(kv[0]), kv[0]))


class CompiledPoly:
    """Array form of an MPoly for vectorised evaluation at many points."""

    __slots__ = ("exps", "coefs", "nvars")

    def __init__(self, exps, coefs, nvars):
        self.exps = exps
        self.coefs = coefs
        self.nvars = nvars

    @classmethod
    def from_mpoly(cls, p):
        if p.terms:
            exps = np.array(list(p.terms.keys()), dtype=np.int64).reshape(len(p.terms), p.nvars)
            coefs = np.array(list(p.terms.values()))
        else:
            exps = np.zeros((0, p.nvars), dtype=np.int64)
            coefs = np.zeros(0)
        return cls(exps, coefs, p.nvars)

    def __call__(self, X):
        """Evaluate at points X of shape (S, nvars); returns (S,)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.coefs.size == 0:
            return np.zeros(X.shape[0])
        mono = np.prod(X[:, None, :] ** self.exps[None, :, :], axis=2)
        return mono @ self.coefs


class PolySystem:
    """Square system of polynomials with analytic Jacobian, vectorised."""

    def __init__(self, polys):
        polys = list(polys)
        if not polys:
            raise ValueError("empty polynomial system")
        self.polys = polys
        self.nvars = polys[0].nvars
        self._f = [p.compiled() for p in polys]
        self._jac = [[p.deriv(k).compiled() for k in range(self.nvars)] for p in polys]

    def __len__(self):
        return len(self.polys)

    def residual(self, X):
        X = np.atleast_2d(X)
        return np.stack([f(X) for f in self._f], axis=1)

    def jacobian(self, X):
        X = np.atleast_2d(X)
        return np.stack([np.stack([g(X) for g in row], axis=1) for row in self._jac], axis=1)
