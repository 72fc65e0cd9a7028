"""Evaluable fields on the slit tangent bundle.

Every field is a black-box evaluator that returns :class:`~spraylab.jets.Jet`
objects in the ``2n`` variables ``(x1..xn, y1..yn)``; variable ``i`` is
``x^{i+1}`` and variable ``n+i`` is ``y^{i+1}``.  Points may carry trailing
batch axes: ``x`` and ``y`` of shape ``(n, *batch)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import exprlang
from .jets import Jet, basis

FIBRE_EPS = 1e-12

JetFn = Callable[[np.ndarray, np.ndarray, int], object]


class SlitBundleError(ValueError):
    """Fibre vector too close to zero."""


@dataclass(frozen=True)
class PhasePoint:
    """A point ``(x, y)`` of the slit tangent bundle."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).reshape(-1)
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if x.shape != y.shape:
            raise ValueError("base and fibre must have the same dimension")
        if np.linalg.norm(y) <= FIBRE_EPS:
            raise SlitBundleError("fibre vector is (numerically) zero")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def dimension(self) -> int:
        return self.x.size


def _as_point(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        x, y = np.broadcast_arrays(x, y)
    return x, y


def phase_variables(x, y, order: int):
    """Identity jets ``(xs, ys)`` at the (possibly batched) point."""
    x, y = _as_point(x, y)
    n = x.shape[0]
    jb = basis(2 * n, order)
    point = np.concatenate([x, y])
    xs = [Jet.variable(jb, i, x[i]) for i in range(n)]
    ys = [Jet.variable(jb, n + i, y[i]) for i in range(n)]
    for v in xs + ys:
        v.point = point
    return xs, ys


def _to_jet(value, x, order):
    if isinstance(value, Jet):
        return value
    n = x.shape[0]
    return Jet.constant(basis(2 * n, order), value, x.shape[1:])


class ScalarField:
    """Function ``F(x, y)`` with jets.

    Parameters
    ----------
    dimension : int
        Base dimension ``n``.
    jetfn : callable
        ``jetfn(x, y, order)`` returning a :class:`Jet` (or a constant).
    label : str
        Human-readable description; expression text when built from text.
    """

    def __init__(self, dimension: int, jetfn: JetFn, label: str = "", valuefn=None):
        self.dimension = int(dimension)
        self._jetfn = jetfn
        self.label = label
        # optional plain float evaluator with the same semantics as the order-0 jet
        self._valuefn = valuefn

    def jet(self, x, y, order: int = 0) -> Jet:
        x, y = _as_point(x, y)
        self._check(x)
        return _to_jet(self._jetfn(x, y, order), x, order)

    def _check(self, x):
        if x.shape[0] != self.dimension:
            raise ValueError(f"field has dimension {self.dimension}, point has {x.shape[0]}")

    def __call__(self, x, y):
        if self._valuefn is not None:
            x, y = _as_point(x, y)
            self._check(x)
            return np.broadcast_to(self._valuefn(x, y), x.shape[1:]).astype(float)
        return self.jet(x, y, 0).value

    @classmethod
    def from_text(cls, text: str, dimension: int) -> "ScalarField":
        expr = exprlang.parse(text, dimension)
        return cls.from_expression(expr)

    @classmethod
    def from_expression(cls, expr: exprlang.Expression) -> "ScalarField":
        def jetfn(x, y, order):
            xs, ys = phase_variables(x, y, order)
            return exprlang.evaluate_on(expr, xs, ys)

        f = cls(expr.dimension, jetfn, expr.text, lambda x, y: expr.evaluate(x=x, y=y))
        f.expression = expr
        return f

    @classmethod
    def from_function(cls, fn, dimension: int, label: str = "") -> "ScalarField":
        """``fn(xs, ys)`` acting on lists of jets (numpy-style arithmetic)."""

        def jetfn(x, y, order):
            xs, ys = phase_variables(x, y, order)
            return fn(xs, ys)

        return cls(dimension, jetfn, label)

    @classmethod
    def constant(cls, value: float, dimension: int) -> "ScalarField":
        return cls(dimension, lambda x, y, order: float(value), repr(float(value)))

    def map(self, fn, label: str = "") -> "ScalarField":
        return ScalarField(self.dimension, lambda x, y, o: fn(self.jet(x, y, o)), label)

    def __add__(self, other):
        return combine(lambda a, b: a + b, self, other)

    def __sub__(self, other):
        return combine(lambda a, b: a - b, self, other)

    def __mul__(self, other):
        return combine(lambda a, b: a * b, self, other)

    __radd__ = __add__
    __rmul__ = __mul__

    def __repr__(self):
        return f"ScalarField(n={self.dimension}, {self.label!r})"


def combine(op, *fields) -> ScalarField:
    """Pointwise combination of scalar fields (numbers are treated as constants)."""
    dims = {f.dimension for f in fields if isinstance(f, ScalarField)}
    if len(dims) != 1:
        raise ValueError("fields of different dimensions")
    (n,) = dims

    def jetfn(x, y, order):
        args = [f.jet(x, y, order) if isinstance(f, ScalarField) else f for f in fields]
        return op(*args)

    return ScalarField(n, jetfn, "combined")


def reflect_fibre(jet: Jet, n: int) -> Jet:
    """Jet of ``f(x, -y)`` given the jet of ``f`` at ``(x, -y)``."""
    sign = np.concatenate([np.ones(n), -np.ones(n)])
    return jet.scale_variables(sign)


def fibre_reversed(F: ScalarField) -> ScalarField:
    """``(x, y) -> F(x, -y)``."""
    n = F.dimension

    def jetfn(x, y, order):
        return reflect_fibre(F.jet(x, -np.asarray(y), order), n)

    return ScalarField(n, jetfn, f"reversed({F.label})")


def linear_in_fibre(alpha: Sequence[ScalarField]) -> ScalarField:
    """``alpha_i(x) y^i`` from component fields (their y-dependence is used as is)."""
    n = len(alpha)

    def jetfn(x, y, order):
        _, ys = phase_variables(x, y, order)
        total = 0.0
        for a, yv in zip(alpha, ys):
            total = total + a.jet(x, y, order) * yv
        return total

    return ScalarField(n, jetfn, "linear")


class SprayField:
    """Spray coefficients ``Gamma^i(x, y)``."""

    def __init__(self, dimension: int, jetfn, label: str = "", components=None):
        self.dimension = int(dimension)
        self._jetfn = jetfn
        self.label = label
        self.components = components

    def jets(self, x, y, order: int = 0) -> list[Jet]:
        x, y = _as_point(x, y)
        if x.shape[0] != self.dimension:
            raise ValueError(f"spray has dimension {self.dimension}, point has {x.shape[0]}")
        return [_to_jet(g, x, order) for g in self._jetfn(x, y, order)]

    def values(self, x, y) -> np.ndarray:
        if self.components is not None and all(c._valuefn is not None for c in self.components):
            return np.array([c(x, y) for c in self.components])
        return np.array([j.value for j in self.jets(x, y, 0)])

    @classmethod
    def from_components(cls, components: Sequence[ScalarField], label: str = "") -> "SprayField":
        comps = tuple(components)
        n = len(comps)
        if any(c.dimension != n for c in comps):
            raise ValueError("spray components must have the spray's dimension")

        def jetfn(x, y, order):
            return [c.jet(x, y, order) for c in comps]

        return cls(n, jetfn, label, comps)

    @classmethod
    def from_text(cls, texts: Sequence[str], label: str = "") -> "SprayField":
        n = len(texts)
        comps = [ScalarField.from_text(t, n) for t in texts]
        return cls.from_components(comps, label or "[" + ", ".join(texts) + "]")

    @classmethod
    def flat(cls, n: int) -> "SprayField":
        return cls.from_text(["0"] * n, f"flat{n}")

    def texts(self):
        """Coefficient expressions when the spray came from text, else ``None``."""
        if self.components is None:
            return None
        out = []
        for c in self.components:
            expr = getattr(c, "expression", None)
            if expr is None:
                return None
            out.append(expr.text)
        return out

    def __repr__(self):
        return f"SprayField(n={self.dimension}, {self.label!r})"


class MultiplierField:
    """Symmetric tensor ``h_ij(x, y)``; only ``i <= j`` entries are stored."""

    def __init__(self, dimension: int, jetfn, label: str = ""):
        self.dimension = int(dimension)
        self._jetfn = jetfn
        self.label = label

    def jets(self, x, y, order: int = 0) -> list[list[Jet]]:
        """Full ``n x n`` nested list of jets (shared objects across the diagonal)."""
        x, y = _as_point(x, y)
        if x.shape[0] != self.dimension:
            raise ValueError(f"multiplier has dimension {self.dimension}, point has {x.shape[0]}")
        upper = self._jetfn(x, y, order)
        n = self.dimension
        out = [[None] * n for _ in range(n)]
        for (i, j), v in upper.items():
            v = _to_jet(v, x, order)
            out[i][j] = v
            out[j][i] = v
        return out

    def values(self, x, y) -> np.ndarray:
        hj = self.jets(x, y, 0)
        return np.array([[e.value for e in row] for row in hj])

    @classmethod
    def from_entries(cls, entries: dict, dimension: int, label: str = "") -> "MultiplierField":
        """``entries[(i, j)]`` (0-based, ``i <= j``) are scalar fields; missing entries are 0."""
        n = dimension
        ent = {}
        for (i, j), f in entries.items():
            if i > j:
                i, j = j, i
            ent[(i, j)] = f

        def jetfn(x, y, order):
            out = {}
            for i in range(n):
                for j in range(i, n):
                    f = ent.get((i, j))
                    out[(i, j)] = 0.0 if f is None else f.jet(x, y, order)
            return out

        return cls(n, jetfn, label)

    @classmethod
    def from_text(cls, entries: dict, dimension: int, label: str = "") -> "MultiplierField":
        fields_ = {k: ScalarField.from_text(v, dimension) for k, v in entries.items()}
        return cls.from_entries(fields_, dimension, label)

    def scaled(self, f: ScalarField) -> "MultiplierField":
        n = self.dimension

        def jetfn(x, y, order):
            fj = f.jet(x, y, order)
            hj = self.jets(x, y, order)
            return {(i, j): fj * hj[i][j] for i in range(n) for j in range(i, n)}

        return MultiplierField(n, jetfn, f"({f.label})*({self.label})")

    def plus(self, other: "MultiplierField") -> "MultiplierField":
        n = self.dimension

        def jetfn(x, y, order):
            a = self.jets(x, y, order)
            b = other.jets(x, y, order)
            return {(i, j): a[i][j] + b[i][j] for i in range(n) for j in range(i, n)}

        return MultiplierField(n, jetfn, f"{self.label}+{other.label}")

    def __repr__(self):
        return f"MultiplierField(n={self.dimension}, {self.label!r})"


def fibre_hessian(F: ScalarField) -> MultiplierField:
    """``h_ij = d^2 F / dy^i dy^j`` with jets drawn from higher-order jets of ``F``."""
    n = F.dimension

    expr = getattr(F, "expression", None)

    def values_only(x, y):
        # order-2 jets in the fibre variables alone, with x held as plain arrays
        ys = Jet.variables(y, 2)
        Fj = exprlang.evaluate_on(expr, list(x), ys)
        batch = x.shape[1:]
        out = {}
        for i in range(n):
            for j in range(i, n):
                v = Fj.partial(i, j) if isinstance(Fj, Jet) else 0.0
                out[(i, j)] = np.broadcast_to(v, batch)
        return out

    def jetfn(x, y, order):
        if order == 0 and expr is not None:
            return values_only(x, y)
        Fj = F.jet(x, y, order + 2)
        out = {}
        for i in range(n):
            di = Fj.diff(n + i)
            for j in range(i, n):
                out[(i, j)] = di.diff(n + j)
        return out

    return MultiplierField(n, jetfn, f"hessian({F.label})")


def fibre_gradient(F: ScalarField) -> list[ScalarField]:
    n = F.dimension
    return [
        ScalarField(n, lambda x, y, o, i=i: F.jet(x, y, o + 1).diff(n + i), f"dF/dy{i + 1}")
        for i in range(n)
    ]
