"""Truncated multivariate Taylor arithmetic.

A :class:`Jet` holds the Taylor coefficients ``c[alpha] = d^alpha f / alpha!``
of a function of ``m`` variables at a base point, for every multi-index with
``|alpha| <= order``.  Arithmetic and the elementary functions propagate the
coefficients exactly (up to rounding), so one forward pass yields every mixed
partial derivative up to the requested order.

Coefficient arrays may carry trailing batch axes: ``coeffs.shape == (M, *batch)``
where ``M`` is the number of monomials.  All operations broadcast over the
batch, which is how quadrature nodes and sphere samples are evaluated in bulk.
"""

from __future__ import annotations

import math
from functools import lru_cache
from itertools import combinations_with_replacement

import numpy as np


class EvaluationError(ArithmeticError):
    """Raised when a jet or value cannot be formed at the requested point."""


class DomainError(EvaluationError):
    """Function argument outside its (smooth) domain, e.g. ``sqrt`` of a nonpositive."""


class DivisionByZeroError(EvaluationError, ZeroDivisionError):
    """Division by an argument whose base value is zero."""


class JetOrderError(ValueError):
    """A derivative was requested beyond the order a jet carries."""


class JetBasis:
    """Graded monomial basis for ``nvars`` variables up to total degree ``order``.

    Use :func:`basis` rather than instantiating directly; bases are cached.
    """

    def __init__(self, nvars: int, order: int):
        if nvars < 1 or order < 0:
            raise ValueError("need nvars >= 1 and order >= 0")
        self.nvars = nvars
        self.order = order
        exps = []
        for d in range(order + 1):
            block = []
            for combo in combinations_with_replacement(range(nvars), d):
                e = [0] * nvars
                for v in combo:
                    e[v] += 1
                block.append(tuple(e))
            # graded reverse order so that x1^2 precedes x1*x2
            block.sort(reverse=True)
            exps.extend(block)
        self.exponents = np.array(exps, dtype=np.int64).reshape(len(exps), nvars)
        self.size = len(exps)
        self.index = {e: i for i, e in enumerate(exps)}
        self.degree = self.exponents.sum(axis=1)
        self.factorial = np.array(
            [math.prod(math.factorial(k) for k in e) for e in exps], dtype=float
        )
        self._build_product_table()
        self._diff_cache: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
        self._shift_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def _build_product_table(self):
        ia, ib, ic = [], [], []
        exps = [tuple(e) for e in self.exponents]
        deg = self.degree
        for a, ea in enumerate(exps):
            for b, eb in enumerate(exps):
                if deg[a] + deg[b] > self.order:
                    continue
                ia.append(a)
                ib.append(b)
                ic.append(self.index[tuple(p + q for p, q in zip(ea, eb))])
        order = np.argsort(ic, kind="stable")
        self._ia = np.asarray(ia)[order]
        self._ib = np.asarray(ib)[order]
        ic_sorted = np.asarray(ic)[order]
        self._starts = np.searchsorted(ic_sorted, np.arange(self.size))

    def multiply(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        prod = a[self._ia] * b[self._ib]
        return np.add.reduceat(prod, self._starts, axis=0)

    def diff_table(self, var: int):
        """Index map for d/d(var): target basis is one order lower."""
        if var in self._diff_cache:
            return self._diff_cache[var]
        lower = basis(self.nvars, self.order - 1)
        src, factor = [], []
        for e in lower.exponents:
            up = list(e)
            up[var] += 1
            src.append(self.index[tuple(up)])
            factor.append(up[var])
        table = (lower, np.asarray(src), np.asarray(factor, dtype=float))
        self._diff_cache[var] = table
        return table

    def shift_table(self, var: int):
        """Index pairs ``(src, dst)`` for multiplication by variable ``var`` (truncated)."""
        if var in self._shift_cache:
            return self._shift_cache[var]
        src, dst = [], []
        for i, e in enumerate(self.exponents):
            if self.degree[i] >= self.order:
                continue
            up = list(e)
            up[var] += 1
            src.append(i)
            dst.append(self.index[tuple(up)])
        table = (np.asarray(src, dtype=int), np.asarray(dst, dtype=int))
        self._shift_cache[var] = table
        return table

    def monomial(self, exponent) -> int:
        return self.index[tuple(exponent)]

    def __repr__(self):
        return f"JetBasis(nvars={self.nvars}, order={self.order})"


@lru_cache(maxsize=None)
def basis(nvars: int, order: int) -> JetBasis:
    return JetBasis(nvars, order)


class Jet:
    """Truncated Taylor polynomial at a base point.

    Parameters
    ----------
    jbasis : JetBasis
        Monomial basis (number of variables and truncation order).
    coeffs : ndarray, shape (M, *batch)
        Taylor coefficients in basis order; ``coeffs[0]`` is the value.
    point : ndarray, optional
        Base point the expansion is taken at (informational).
    """

    __slots__ = ("basis", "coeffs", "point", "affine")
    __array_priority__ = 1000

    def __init__(self, jbasis: JetBasis, coeffs, point=None, affine: bool = False):
        self.basis = jbasis
        self.coeffs = np.asarray(coeffs, dtype=float)
        self.point = point
        # True only if every coefficient of degree >= 2 is known to vanish
        self.affine = affine

    # construction ---------------------------------------------------------
    @classmethod
    def constant(cls, jbasis: JetBasis, value, batch=()):
        value = np.broadcast_to(np.asarray(value, dtype=float), batch)
        c = np.zeros((jbasis.size,) + tuple(batch))
        c[0] = value
        return cls(jbasis, c, affine=True)

    @classmethod
    def variable(cls, jbasis: JetBasis, var: int, value):
        value = np.asarray(value, dtype=float)
        c = np.zeros((jbasis.size,) + value.shape)
        c[0] = value
        if jbasis.order >= 1:
            e = [0] * jbasis.nvars
            e[var] = 1
            c[jbasis.index[tuple(e)]] = 1.0
        return cls(jbasis, c, affine=True)

    @classmethod
    def variables(cls, point, order: int, nvars: int | None = None):
        """Identity jets for each coordinate of ``point`` (shape (m, *batch))."""
        point = np.asarray(point, dtype=float)
        m = point.shape[0] if nvars is None else nvars
        jb = basis(m, order)
        return [cls.variable(jb, v, point[v]) for v in range(m)]

    # basic accessors ------------------------------------------------------
    @property
    def order(self) -> int:
        return self.basis.order

    @property
    def nvars(self) -> int:
        return self.basis.nvars

    @property
    def value(self):
        return self.coeffs[0]

    @property
    def batch_shape(self):
        return self.coeffs.shape[1:]

    def coefficient(self, exponent):
        return self.coeffs[self.basis.index[tuple(exponent)]]

    def partial(self, *variables: int):
        """Mixed partial derivative, e.g. ``partial(0, 3)`` is d^2/dv0 dv3."""
        e = [0] * self.nvars
        for v in variables:
            e[v] += 1
        if sum(e) > self.order:
            raise JetOrderError(
                f"derivative of order {sum(e)} requested from a jet of order {self.order}"
            )
        i = self.basis.index[tuple(e)]
        return self.basis.factorial[i] * self.coeffs[i]

    def gradient(self):
        return np.array([self.partial(v) for v in range(self.nvars)])

    def table(self) -> dict[tuple[int, ...], np.ndarray]:
        """All partial derivatives keyed by exponent multi-index."""
        out = {}
        for i, e in enumerate(self.basis.exponents):
            out[tuple(int(k) for k in e)] = self.basis.factorial[i] * self.coeffs[i]
        return out

    def truncate(self, order: int) -> "Jet":
        if order == self.order:
            return self
        if order > self.order:
            raise JetOrderError(f"cannot raise jet order {self.order} to {order}")
        lower = basis(self.nvars, order)
        return Jet(lower, self.coeffs[: lower.size], self.point, self.affine)

    def diff(self, var: int) -> "Jet":
        """Exact partial derivative jet (one order lower)."""
        if self.order == 0:
            raise JetOrderError("cannot differentiate an order-0 jet")
        lower, src, factor = self.basis.diff_table(var)
        f = factor.reshape((-1,) + (1,) * len(self.batch_shape))
        return Jet(lower, self.coeffs[src] * f, self.point, self.affine)

    def scale_variables(self, scale) -> "Jet":
        """Jet of ``f(p + s*d)`` in d, i.e. coefficient ``c_alpha * prod s_v^alpha_v``."""
        s = np.asarray(scale, dtype=float)
        w = np.prod(s[None, :] ** self.basis.exponents, axis=1)
        return Jet(self.basis, self.coeffs * w.reshape((-1,) + (1,) * len(self.batch_shape)),
                   affine=self.affine)

    def restrict(self, variables) -> "Jet":
        """Zero every monomial that involves a variable outside ``variables``."""
        keep = np.zeros(self.nvars, dtype=bool)
        keep[list(variables)] = True
        mask = np.all((self.basis.exponents == 0) | keep[None, :], axis=1)
        return Jet(self.basis, self.coeffs * mask.reshape((-1,) + (1,) * len(self.batch_shape)),
                   affine=self.affine)

    def take(self, index) -> "Jet":
        """Select batch entries."""
        return Jet(self.basis, self.coeffs[(slice(None),) + (index,)], affine=self.affine)

    # arithmetic -----------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, Jet):
            if other.nvars != self.nvars:
                raise ValueError("jets over different variable sets")
            if other.order == self.order:
                return self, other
            k = min(self.order, other.order)
            return self.truncate(k), other.truncate(k)
        return None

    def __neg__(self):
        return Jet(self.basis, -self.coeffs, affine=self.affine)

    def __pos__(self):
        return self

    def __add__(self, other):
        pair = self._coerce(other)
        if pair is None:
            c = self.coeffs.copy()
            c[0] = c[0] + other
            return Jet(self.basis, c, affine=self.affine)
        a, b = pair
        return Jet(a.basis, a.coeffs + b.coeffs, affine=a.affine and b.affine)

    __radd__ = __add__

    def __sub__(self, other):
        pair = self._coerce(other)
        if pair is None:
            c = self.coeffs.copy()
            c[0] = c[0] - other
            return Jet(self.basis, c, affine=self.affine)
        a, b = pair
        return Jet(a.basis, a.coeffs - b.coeffs, affine=a.affine and b.affine)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        pair = self._coerce(other)
        if pair is None:
            return Jet(self.basis, self.coeffs * np.asarray(other, dtype=float), affine=self.affine)
        a, b = pair
        if a.order == 0:
            return Jet(a.basis, a.coeffs * b.coeffs, affine=True)
        if b.affine and not a.affine:
            a, b = b, a
        if a.affine:
            return _affine_product(a, b)
        return Jet(a.basis, a.basis.multiply(a.coeffs, b.coeffs))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * reciprocal(other)
        other = np.asarray(other, dtype=float)
        if np.any(other == 0):
            raise DivisionByZeroError("division by zero")
        return Jet(self.basis, self.coeffs / other, affine=self.affine)

    def __rtruediv__(self, other):
        return reciprocal(self) * other

    def __pow__(self, exponent):
        if isinstance(exponent, Jet):
            return exp(exponent * log(self))
        return power(self, exponent)

    def __rpow__(self, base):
        base = np.asarray(base, dtype=float)
        if np.any(base <= 0):
            raise DomainError("power with nonpositive base and jet exponent")
        return exp(self * np.log(base))

    def __repr__(self):
        return f"Jet(nvars={self.nvars}, order={self.order}, value={self.value!r})"


def _affine_product(a: Jet, b: Jet) -> Jet:
    """``a * b`` when ``a`` has no terms of degree >= 2: one shifted copy of ``b`` per variable."""
    jb = a.basis
    out = a.coeffs[0] * b.coeffs
    for v in range(jb.nvars):
        av = a.coeffs[1 + v]
        if not np.any(av):
            continue
        src, dst = jb.shift_table(v)
        out[dst] += av * b.coeffs[src]
    affine = b.affine and (jb.order < 2 or not _has_quadratic(a, b))
    return Jet(jb, out, affine=affine)


def _has_quadratic(a: Jet, b: Jet) -> bool:
    return bool(np.any(a.coeffs[1 : 1 + a.nvars]) and np.any(b.coeffs[1 : 1 + b.nvars]))


# univariate composition ---------------------------------------------------


def compose(a: Jet, derivs) -> Jet:
    """Compose ``a`` with a univariate function given its Taylor coefficients.

    ``derivs[k]`` must equal ``g^(k)(a0) / k!`` for ``k = 0..a.order``
    (arrays broadcasting against the batch shape).
    """
    K = a.order
    if K == 0:
        return Jet.constant(a.basis, derivs[0], a.batch_shape)
    tail = a.coeffs.copy()
    tail[0] = 0.0
    t = Jet(a.basis, tail)
    result = Jet.constant(a.basis, derivs[K], a.batch_shape)
    for k in range(K - 1, -1, -1):
        result = result * t + derivs[k]
    return result


def _require(cond, exc, msg):
    if np.any(cond):
        raise exc(msg)


def reciprocal(a: Jet) -> Jet:
    a0 = a.value
    _require(a0 == 0, DivisionByZeroError, "division by zero")
    inv = 1.0 / a0
    derivs = [(-1.0) ** k * inv ** (k + 1) for k in range(a.order + 1)]
    return compose(a, derivs)


def sqrt(a: Jet) -> Jet:
    a0 = a.value
    if a.order == 0:
        _require(a0 < 0, DomainError, "sqrt of a negative argument")
        return Jet(a.basis, np.sqrt(a.coeffs))
    _require(a0 <= 0, DomainError, "sqrt of a nonpositive argument")
    return _binomial_series(a, 0.5)


def _binomial_series(a: Jet, p: float) -> Jet:
    a0 = a.value
    derivs = []
    coef = 1.0
    for k in range(a.order + 1):
        derivs.append(coef * a0 ** (p - k))
        coef *= (p - k) / (k + 1)
    return compose(a, derivs)


def power(a: Jet, p) -> Jet:
    pf = float(p)
    if pf.is_integer():
        n = int(pf)
        if n == 0:
            return Jet.constant(a.basis, 1.0, a.batch_shape)
        if n < 0:
            return power(reciprocal(a), -n)
        result = None
        base = a
        while n:
            if n & 1:
                result = base if result is None else result * base
            n >>= 1
            if n:
                base = base * base
        return result
    a0 = a.value
    _require(a0 < 0, DomainError, "fractional power of a negative argument")
    if a.order > 0:
        _require(a0 == 0, DomainError, "fractional power at zero is not smooth")
    return _binomial_series(a, pf)


def exp(a: Jet) -> Jet:
    e = np.exp(a.value)
    return compose(a, [e / math.factorial(k) for k in range(a.order + 1)])


def log(a: Jet) -> Jet:
    a0 = a.value
    _require(a0 <= 0, DomainError, "log of a nonpositive argument")
    derivs = [np.log(a0)]
    for k in range(1, a.order + 1):
        derivs.append((-1.0) ** (k + 1) / (k * a0**k))
    return compose(a, derivs)


def sin(a: Jet) -> Jet:
    s, c = np.sin(a.value), np.cos(a.value)
    cycle = [s, c, -s, -c]
    return compose(a, [cycle[k % 4] / math.factorial(k) for k in range(a.order + 1)])


def cos(a: Jet) -> Jet:
    s, c = np.sin(a.value), np.cos(a.value)
    cycle = [c, -s, -c, s]
    return compose(a, [cycle[k % 4] / math.factorial(k) for k in range(a.order + 1)])


def atan(a: Jet) -> Jet:
    """Arctangent; derivatives from the series of 1/(1+t^2)."""
    a0 = np.asarray(a.value, dtype=float)
    K = a.order
    derivs = [np.arctan(a0)]
    if K >= 1:
        # Taylor coefficients of g'(a0 + t) = 1/(1 + (a0+t)^2) via a 1-variable jet
        jb = basis(1, K - 1)
        t = Jet.variable(jb, 0, a0)
        gp = reciprocal(t * t + 1.0)
        for k in range(1, K + 1):
            derivs.append(gp.coeffs[k - 1] / k)
    return compose(a, derivs)


def stack_values(jets) -> np.ndarray:
    return np.array([j.value for j in jets])
