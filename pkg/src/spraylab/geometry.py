"""Sprays and their geometric invariants.

Conventions: a spray is ``y^i d/dx^i - 2 Gamma^i d/dy^i`` with ``Gamma^i``
positively homogeneous of degree 2 in ``y``.  The horizontal and vertical
frames are ``H_i = d/dx^i - Gamma^j_i d/dy^j`` and ``V_i = d/dy^i`` where
``Gamma^j_i = dGamma^j/dy^i``.

Most functions accept a :class:`~spraylab.fields.PhasePoint` or batched
``(x, y)`` arrays of shape ``(n, m)``; array-valued results then carry the
batch axes last (e.g. ``R^i_j`` has shape ``(n, n, m)``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import (
    FIBRE_EPS,
    MultiplierField,
    PhasePoint,
    ScalarField,
    SlitBundleError,
    SprayField,
    phase_variables,
    reflect_fibre,
)
from .jets import Jet
from .report import DiagnosticReport

HOMOGENEITY_TOL = 1e-9
BRACKET_TOL = 1e-7
SCALES = (0.5, 2.0, 3.0)


class HomogeneityError(ValueError):
    """A field fails its required fibre homogeneity."""


def as_arrays(p, y=None):
    """Normalise a PhasePoint, a list of them, or ``(x, y)`` arrays to ``(n, *batch)`` arrays."""
    if y is not None:
        x = np.asarray(p, dtype=float)
        y = np.asarray(y, dtype=float)
    elif isinstance(p, PhasePoint):
        x, y = p.x, p.y
    elif isinstance(p, tuple) and len(p) == 2:
        x, y = np.asarray(p[0], dtype=float), np.asarray(p[1], dtype=float)
    else:
        pts = list(p)
        x = np.stack([q.x for q in pts], axis=-1)
        y = np.stack([q.y for q in pts], axis=-1)
    if np.any(np.linalg.norm(y, axis=0) <= FIBRE_EPS):
        raise SlitBundleError("fibre vector is (numerically) zero")
    return x, y


def homogeneity_residual(F: ScalarField, x, y, degree: float) -> np.ndarray:
    """``y^i dF/dy^i - degree * F`` (Euler form), batched."""
    n = F.dimension
    j = F.jet(x, y, 1)
    euler = sum(y[i] * j.partial(n + i) for i in range(n))
    return euler - degree * j.value


def spray_derivative(G: list[Jet], f: Jet, ys: list[Jet]) -> Jet:
    """Jet of ``Gamma(f) = y^k df/dx^k - 2 Gamma^k df/dy^k`` (one order lower)."""
    n = len(G)
    out = 0.0
    for k in range(n):
        out = out + ys[k] * f.diff(k) - 2.0 * G[k] * f.diff(n + k)
    return out


# ---------------------------------------------------------------------------
# validation


def validate_spray(S: SprayField, samples, tol: float = HOMOGENEITY_TOL) -> DiagnosticReport:
    """Sampled degree-2 homogeneity of the coefficients."""
    x, y = as_arrays(samples)
    g = S.values(x, y)
    worst = 0.0
    for k in SCALES:
        gk = S.values(x, k * y)
        res = np.abs(gk - k * k * g) / (1.0 + np.abs(g))
        worst = max(worst, float(np.max(res)))
    rep = DiagnosticReport("validate_spray")
    rep.add("homogeneity", worst, tol, scales=list(SCALES))
    return rep


# ---------------------------------------------------------------------------
# connection and curvature


@dataclass
class ConnectionData:
    """``gamma1[i, j] = Gamma^i_j`` and ``gamma2[k, i, j] = Gamma^k_ij``."""

    spray: np.ndarray
    gamma1: np.ndarray
    gamma2: np.ndarray
    y: np.ndarray

    def euler_residuals(self) -> tuple[float, float]:
        """``|Gamma^i_j y^j - 2 Gamma^i|`` and ``|Gamma^k_ij y^j - Gamma^k_i|``."""
        r1 = np.einsum("ij...,j...->i...", self.gamma1, self.y) - 2 * self.spray
        r2 = np.einsum("kij...,j...->ki...", self.gamma2, self.y) - self.gamma1
        return float(np.max(np.abs(r1))), float(np.max(np.abs(r2)))


def connection(S: SprayField, p, y=None) -> ConnectionData:
    x, y = as_arrays(p, y)
    n = S.dimension
    G = S.jets(x, y, 2)
    g1 = np.array([[G[i].partial(n + j) for j in range(n)] for i in range(n)])
    g2 = np.array(
        [[[G[k].partial(n + i, n + j) for j in range(n)] for i in range(n)] for k in range(n)]
    )
    return ConnectionData(np.array([g.value for g in G]), g1, g2, y)


@dataclass
class CurvatureData:
    """Point values of the spray curvatures.

    ``jacobi[i, j] = R^i_j``, ``riemann[i, j, k] = R^i_jk``, ``weyl[i, j] = W^i_j``.
    For ``n = 2`` the Weyl block is zero and ``weyl_defined`` is False.
    """

    gamma1: np.ndarray
    gamma2: np.ndarray
    jacobi: np.ndarray
    riemann: np.ndarray
    ricci_scalar: np.ndarray
    rho: np.ndarray
    weyl: np.ndarray
    weyl_defined: bool
    y: np.ndarray


def jacobi_jet(S: SprayField, x, y, order: int = 1):
    """Jets of ``R^i_j`` (order ``order``) plus the order-``order+1`` jets of ``Gamma^i_j``.

    ``R^i_j = 2 dGamma^i/dx^j - Gamma(Gamma^i_j) - Gamma^i_k Gamma^k_j``.
    """
    n = S.dimension
    top = order + 2
    G = S.jets(x, y, top)
    _, ys = phase_variables(x, y, top)
    Gij = [[G[i].diff(n + j) for j in range(n)] for i in range(n)]
    R = []
    for i in range(n):
        row = []
        for j in range(n):
            r = 2.0 * G[i].diff(j) - spray_derivative(G, Gij[i][j], ys)
            for k in range(n):
                r = r - Gij[i][k] * Gij[k][j]
            row.append(r.truncate(order))
        R.append(row)
    return R, Gij, G


def curvature(S: SprayField, p, y=None) -> CurvatureData:
    x, y = as_arrays(p, y)
    n = S.dimension
    Rj, Gij, _ = jacobi_jet(S, x, y, 1)
    jac = np.array([[Rj[i][j].value for j in range(n)] for i in range(n)])
    # dR[i, j, k] = dR^i_j / dy^k
    dR = np.array([[[Rj[i][j].partial(n + k) for k in range(n)] for j in range(n)] for i in range(n)])
    riemann = (dR - np.swapaxes(dR, 1, 2)) / 3.0
    g1 = np.array([[Gij[i][j].value for j in range(n)] for i in range(n)])
    g2 = np.array(
        [[[Gij[k][i].partial(n + j) for j in range(n)] for i in range(n)] for k in range(n)]
    )
    trace = np.trace(jac, axis1=0, axis2=1)
    batch = jac.shape[2:]
    if n >= 3:
        Rs = trace / (n - 1)
        dRs = np.array([sum(dR[k, k, j] for k in range(n)) for j in range(n)]) / (n - 1)
        div = np.array([sum(dR[k, j, k] for k in range(n)) for j in range(n)])
        rho = (div - dRs) / (n + 1)
        eye = np.eye(n).reshape((n, n) + (1,) * len(batch))
        weyl = jac - Rs * eye - y[:, None] * rho[None, :]
        defined = True
    else:
        Rs = trace / (n - 1)
        rho = np.zeros((n,) + batch)
        weyl = np.zeros_like(jac)
        defined = False
    return CurvatureData(g1, g2, jac, riemann, Rs, rho, weyl, defined, y)


# ---------------------------------------------------------------------------
# bracket identities


def _value(c, batch):
    return c.value if isinstance(c, Jet) else np.broadcast_to(np.asarray(c, dtype=float), batch)


def _partial(c, v, batch):
    if isinstance(c, Jet):
        return c.partial(v)
    return np.zeros(batch)


def lie_bracket(X, Y, batch=()) -> np.ndarray:
    """Components of ``[X, Y]`` for fields given as lists of order-1 jets (or constants)."""
    m = len(X)
    out = []
    for a in range(m):
        acc = np.zeros(batch)
        for b in range(m):
            acc = acc + _value(X[b], batch) * _partial(Y[a], b, batch)
            acc = acc - _value(Y[b], batch) * _partial(X[a], b, batch)
        out.append(acc)
    return np.array(out)


def frame(S: SprayField, x, y):
    """Order-1 jet components of ``Gamma``, ``H_i`` and ``V_i`` on ``TM``."""
    n = S.dimension
    G = S.jets(x, y, 2)
    _, ys = phase_variables(x, y, 1)
    gamma = [ys[i] for i in range(n)] + [-2.0 * G[i].truncate(1) for i in range(n)]
    H, V = [], []
    for i in range(n):
        H.append([1.0 if a == i else 0.0 for a in range(n)] + [-G[j].diff(n + i) for j in range(n)])
        V.append([0.0] * n + [1.0 if a == i else 0.0 for a in range(n)])
    return gamma, H, V


def bracket_residuals(S: SprayField, p, y=None, *, jacobi_shift: float = 0.0,
                      tol: float = BRACKET_TOL) -> DiagnosticReport:
    """Check the three frame bracket identities with the coordinate curvature.

    ``jacobi_shift`` adds ``shift * delta^i_j`` to ``R^i_j`` before comparing
    (fault injection for tests).
    """
    x, y = as_arrays(p, y)
    n = S.dimension
    batch = x.shape[1:]
    cd = curvature(S, x, y)
    g1 = cd.gamma1
    R = cd.jacobi + jacobi_shift * np.eye(n).reshape((n, n) + (1,) * len(batch))
    gamma, H, V = frame(S, x, y)

    def vec_H(j):
        return np.concatenate([np.eye(n)[j].reshape((n,) + (1,) * len(batch)) * np.ones(batch), -g1[:, j]])

    def vec_V(j):
        return np.concatenate([np.zeros((n,) + batch), np.eye(n)[j].reshape((n,) + (1,) * len(batch)) * np.ones(batch)])

    res1 = res2 = res3 = 0.0
    for i in range(n):
        lhs = lie_bracket(gamma, H[i], batch)
        rhs = sum(g1[j, i] * vec_H(j) + R[j, i] * vec_V(j) for j in range(n))
        res1 = max(res1, _rel(lhs, rhs))
        lhs = lie_bracket(gamma, V[i], batch)
        rhs = -vec_H(i) + sum(g1[j, i] * vec_V(j) for j in range(n))
        res2 = max(res2, _rel(lhs, rhs))
    for j in range(n):
        for k in range(n):
            lhs = lie_bracket(H[j], H[k], batch)
            rhs = -sum(cd.riemann[i, j, k] * vec_V(i) for i in range(n))
            res3 = max(res3, _rel(lhs, rhs))
    rep = DiagnosticReport("bracket_residuals")
    rep.add("[Gamma,H]", res1, tol)
    rep.add("[Gamma,V]", res2, tol)
    rep.add("[H,H]", res3, tol)
    return rep


def _rel(a, b):
    scale = 1.0 + np.max(np.abs(b), axis=0)
    return float(np.max(np.abs(a - b) / scale))


# ---------------------------------------------------------------------------
# dynamical covariant derivative


def covariant_derivative_02(S: SprayField, h: MultiplierField, p, y=None) -> np.ndarray:
    """``(nabla h)_ij = Gamma(h_ij) - Gamma^k_i h_kj - Gamma^k_j h_ik``."""
    x, y = as_arrays(p, y)
    n = S.dimension
    G = S.jets(x, y, 1)
    hj = h.jets(x, y, 1)
    g = np.array([gk.value for gk in G])
    g1 = np.array([[G[i].partial(n + j) for j in range(n)] for i in range(n)])
    hv = np.array([[e.value for e in row] for row in hj])
    out = np.empty((n, n) + x.shape[1:])
    for i in range(n):
        for j in range(n):
            e = hj[i][j]
            d = sum(y[k] * e.partial(k) - 2.0 * g[k] * e.partial(n + k) for k in range(n))
            d = d - sum(g1[k, i] * hv[k, j] + g1[k, j] * hv[i, k] for k in range(n))
            out[i, j] = d
    return out


# ---------------------------------------------------------------------------
# projective changes and reversal


def projective_change(S: SprayField, P: ScalarField, *, check_points=None) -> SprayField:
    """``Gamma^i + P y^i`` (the spray ``Gamma - 2 P Delta``).

    ``P`` must satisfy ``Delta(P) = P``; this is checked at ``check_points``
    (20 seeded points by default).
    """
    n = S.dimension
    if P.dimension != n:
        raise ValueError("dimension mismatch")
    if check_points is None:
        from .sampling import random_phase_points

        check_points = random_phase_points(n, 20, seed=12345)
    x, y = as_arrays(check_points)
    res = homogeneity_residual(P, x, y, 1.0)
    worst = float(np.max(np.abs(res) / (1.0 + np.abs(P(x, y)))))
    if worst >= HOMOGENEITY_TOL:
        raise HomogeneityError(f"projective factor is not of degree 1 (residual {worst:.2e})")

    def jetfn(x, y, order):
        G = S.jets(x, y, order)
        Pj = P.jet(x, y, order)
        _, ys = phase_variables(x, y, order)
        return [G[i] + Pj * ys[i] for i in range(n)]

    return SprayField(n, jetfn, f"projective({S.label}; {P.label})")


def projective_shift_residual(S: SprayField, P: ScalarField, p, y=None) -> float:
    """Max deviation from ``~Gamma^i_j = Gamma^i_j + P delta^i_j + P_j y^i``."""
    x, y = as_arrays(p, y)
    n = S.dimension
    a = connection(S, x, y).gamma1
    b = connection(projective_change(S, P), x, y).gamma1
    Pj = P.jet(x, y, 1)
    P0 = Pj.value
    dP = np.array([Pj.partial(n + j) for j in range(n)])
    eye = np.eye(n).reshape((n, n) + (1,) * (x.ndim - 1))
    pred = a + P0 * eye + y[:, None] * dP[None, :]
    return float(np.max(np.abs(b - pred)))


def reverse_spray(S: SprayField) -> SprayField:
    """``Gamma^i(x, -y)``: geodesics of the reverse are the reversed geodesics."""
    n = S.dimension

    def jetfn(x, y, order):
        return [reflect_fibre(g, n) for g in S.jets(x, -np.asarray(y), order)]

    return SprayField(n, jetfn, f"reverse({S.label})")


def symmetrize_spray(S: SprayField) -> SprayField:
    n = S.dimension
    R = reverse_spray(S)

    def jetfn(x, y, order):
        a = S.jets(x, y, order)
        b = R.jets(x, y, order)
        return [0.5 * (a[i] + b[i]) for i in range(n)]

    return SprayField(n, jetfn, f"symmetrized({S.label})")


def difference_factor(S1: SprayField, S2: SprayField) -> ScalarField:
    """``P = (Gamma2 - Gamma1) . y / |y|^2``, the only candidate factor."""
    n = S1.dimension

    def jetfn(x, y, order):
        a = S1.jets(x, y, order)
        b = S2.jets(x, y, order)
        _, ys = phase_variables(x, y, order)
        num = sum((b[i] - a[i]) * ys[i] for i in range(n))
        den = sum(ys[i] * ys[i] for i in range(n))
        return num / den

    return ScalarField(n, jetfn, f"P({S1.label}->{S2.label})")


@dataclass
class EquivalenceResult:
    equivalent: bool
    factor: ScalarField | None
    factor_values: np.ndarray
    residual: float
    worst_index: int
    report: DiagnosticReport


def projective_equivalence(S1: SprayField, S2: SprayField, samples, tol: float = 1e-8) -> EquivalenceResult:
    """Decide whether ``Gamma2 - Gamma1 = P y`` at every sample."""
    if S1.dimension != S2.dimension:
        raise ValueError("sprays of different dimensions")
    x, y = as_arrays(samples)
    D = S2.values(x, y) - S1.values(x, y)
    yy = np.sum(y * y, axis=0)
    Pv = np.sum(D * y, axis=0) / yy
    res = np.linalg.norm(D - Pv * y, axis=0) / (1.0 + np.linalg.norm(D, axis=0))
    worst = int(np.argmax(res))
    rep = DiagnosticReport("projective_equivalence")
    rep.add("proportionality", float(res[worst]), tol, worst_sample=worst)
    P = difference_factor(S1, S2)
    ok = rep.passed
    if ok:
        hres = homogeneity_residual(P, x, y, 1.0)
        rep.add("Delta(P)-P", float(np.max(np.abs(hres))), tol)
        ok = rep.passed
    else:
        rep.flags["worst_point"] = {"x": x[:, worst].tolist(), "y": y[:, worst].tolist()}
    return EquivalenceResult(ok, P if ok else None, Pv, float(res[worst]), worst, rep)
