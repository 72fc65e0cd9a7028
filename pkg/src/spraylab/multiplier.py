"""Multipliers: the Helmholtz-type conditions for a symmetric tensor ``h_ij(x, y)``.

Conditions checked by :func:`helmholtz_report`:

(i)   ``h_ij = h_ji``
(ii)  ``h_ij y^j = 0``
(iii) ``dh_ij/dy^k = dh_ik/dy^j``
(iv)  ``(nabla h)_ij = 0``
(v)   ``h_ik W^k_j = h_jk W^k_i``

All residuals are divided by ``1 + max|h_ij|`` at the sample.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import MultiplierField, ScalarField, SprayField, fibre_hessian
from .finsler import restricted_eigenvalues
from .geometry import as_arrays, covariant_derivative_02, curvature, homogeneity_residual, projective_change
from .report import DiagnosticReport

HELMHOLTZ_TOL = 1e-7
CONDITIONS = ("symmetry", "kernel", "closedness", "nabla", "weyl")


def _scale(hv):
    return 1.0 + np.max(np.abs(hv), axis=(0, 1))


def _max(res, scale):
    # res has shape (..., *batch); reduce everything
    r = np.abs(res) / scale
    return float(np.max(r)) if r.size else 0.0


@dataclass
class _HData:
    values: np.ndarray
    dy: np.ndarray  # dy[i, j, k] = dh_ij/dy^k
    scale: np.ndarray


def _hdata(h: MultiplierField, x, y) -> _HData:
    n = h.dimension
    hj = h.jets(x, y, 1)
    hv = np.array([[e.value for e in row] for row in hj])
    dy = np.array([[[e.partial(n + k) for k in range(n)] for e in row] for row in hj])
    return _HData(hv, dy, _scale(hv))


def symmetry_residual(hv, scale):
    return _max(hv - np.swapaxes(hv, 0, 1), scale)


def kernel_residual(hv, y, scale):
    return _max(np.einsum("ij...,j...->i...", hv, y), scale)


def closedness_residual(dy, scale):
    return _max(dy - np.swapaxes(dy, 1, 2), scale)


def degree_residual(hv, dy, y, scale):
    """``y^k dh_ij/dy^k + h_ij`` (degree -1 homogeneity)."""
    return _max(np.einsum("ijk...,k...->ij...", dy, y) + hv, scale)


def weyl_form(hv, W):
    A = np.einsum("ik...,kj...->ij...", hv, W)
    return A - np.swapaxes(A, 0, 1)


def helmholtz_report(h: MultiplierField, S: SprayField, samples, tol: float = HELMHOLTZ_TOL,
                     tolerances: dict | None = None) -> DiagnosticReport:
    x, y = as_arrays(samples)
    tols = {c: tol for c in CONDITIONS}
    tols.update(tolerances or {})
    hd = _hdata(h, x, y)
    nab = covariant_derivative_02(S, h, x, y)
    cd = curvature(S, x, y)
    rep = DiagnosticReport("helmholtz")
    rep.add("symmetry", symmetry_residual(hd.values, hd.scale), tols["symmetry"])
    rep.add("kernel", kernel_residual(hd.values, y, hd.scale), tols["kernel"])
    rep.add("closedness", closedness_residual(hd.dy, hd.scale), tols["closedness"])
    rep.add("nabla", _max(nab, hd.scale), tols["nabla"])
    rep.add("weyl", _max(weyl_form(hd.values, cd.weyl), hd.scale), tols["weyl"])
    rep.flags["degree_minus_one_residual"] = degree_residual(hd.values, hd.dy, y, hd.scale)
    rep.flags["weyl_defined"] = cd.weyl_defined
    return rep


def hessian_of(F: ScalarField) -> MultiplierField:
    """``h_ij = d^2F/dy^i dy^j``; order-k jets of ``h`` use order-(k+2) jets of ``F``."""
    return fibre_hessian(F)


@dataclass
class CompatResult:
    r_form: float
    cyclic_form: float
    w_form: float
    verdicts: tuple[bool, bool, bool]
    agree: bool
    premise_ok: bool
    report: DiagnosticReport


def curvature_compat(h: MultiplierField, S: SprayField, p, y=None, tol: float = HELMHOLTZ_TOL) -> CompatResult:
    """The Jacobi, cyclic and Weyl forms of the curvature condition, and whether they agree."""
    x, y = as_arrays(p, y)
    hd = _hdata(h, x, y)
    cd = curvature(S, x, y)
    hv = hd.values
    A = np.einsum("ik...,kj...->ij...", hv, cd.jacobi)
    r_form = _max(A - np.swapaxes(A, 0, 1), hd.scale)
    # T[i, j, k] = h_il R^l_jk
    T = np.einsum("il...,ljk...->ijk...", hv, cd.riemann)
    cyc = T + np.transpose(T, (1, 2, 0) + tuple(range(3, T.ndim))) + np.transpose(
        T, (2, 0, 1) + tuple(range(3, T.ndim))
    )
    cyc_form = _max(cyc, hd.scale)
    if cd.weyl_defined:
        w_form = _max(weyl_form(hv, cd.weyl), hd.scale)
    else:
        w_form = r_form if S.dimension == 2 else 0.0
    premise = max(
        symmetry_residual(hv, hd.scale),
        kernel_residual(hv, y, hd.scale),
        closedness_residual(hd.dy, hd.scale),
    )
    premise_ok = premise < tol
    verdicts = (r_form < tol, cyc_form < tol, w_form < tol)
    agree = len(set(verdicts)) == 1
    rep = DiagnosticReport("curvature_compat")
    rep.add("jacobi_form", r_form, tol)
    rep.add("cyclic_form", cyc_form, tol)
    rep.add("weyl_form", w_form, tol)
    rep.flags["premise_residual"] = premise
    rep.flags["premise_ok"] = premise_ok
    rep.flags["verdicts_agree"] = agree
    if S.dimension == 2:
        rep.flags["weyl_note"] = "W vanishes identically in dimension 2; the Jacobi form is reported"
    return CompatResult(r_form, cyc_form, w_form, verdicts, agree, premise_ok, rep)


def nabla_projective_invariance(h: MultiplierField, S: SprayField, P: ScalarField, samples,
                                tol: float = 1e-8) -> DiagnosticReport:
    """``nabla h`` for ``S`` and for its projective change by ``P``."""
    x, y = as_arrays(samples)
    hd = _hdata(h, x, y)
    deg = degree_residual(hd.values, hd.dy, y, hd.scale)
    ker = kernel_residual(hd.values, y, hd.scale)
    a = covariant_derivative_02(S, h, x, y)
    b = covariant_derivative_02(projective_change(S, P), h, x, y)
    rep = DiagnosticReport("nabla_projective_invariance")
    rep.add("difference", _max(a - b, hd.scale), tol)
    rep.flags["degree_minus_one_residual"] = deg
    rep.flags["kernel_residual"] = ker
    rep.flags["hypothesis_ok"] = bool(deg < HELMHOLTZ_TOL and ker < HELMHOLTZ_TOL)
    return rep


class InvariantError(ValueError):
    pass


def scale_2d(h: MultiplierField, f: ScalarField, S: SprayField, samples=None,
             tol: float = 1e-9) -> MultiplierField:
    """``f h`` for a planar multiplier, with ``f`` of degree 0 and constant along the flow.

    Both properties of ``f`` are checked at the samples (50 seeded points by default).
    """
    if h.dimension != 2 or f.dimension != 2 or S.dimension != 2:
        raise ValueError("scale_2d is only meaningful in dimension 2")
    if samples is None:
        from .sampling import random_phase_points

        samples = random_phase_points(2, 50, seed=2024)
    x, y = as_arrays(samples)
    fv = f(x, y)
    deg = float(np.max(np.abs(homogeneity_residual(f, x, y, 0.0)) / (1 + np.abs(fv))))
    if deg >= tol:
        raise InvariantError(f"f is not of degree 0 (residual {deg:.2e})")
    flow = float(np.max(np.abs(flow_derivative(f, S, x, y)) / (1 + np.abs(fv))))
    if flow >= tol:
        raise InvariantError(f"f is not a first integral of the spray (residual {flow:.2e})")
    return h.scaled(f)


def flow_derivative(f: ScalarField, S: SprayField, x, y) -> np.ndarray:
    """``Gamma(f) = y^k df/dx^k - 2 Gamma^k df/dy^k``."""
    n = f.dimension
    j = f.jet(x, y, 1)
    g = S.values(x, y)
    return sum(y[k] * j.partial(k) - 2.0 * g[k] * j.partial(n + k) for k in range(n))


def quasi_regularity(h: MultiplierField, p, y=None) -> np.ndarray:
    """Smallest |eigenvalue| of ``h`` on the complement of ``y`` (kernel exactly the ray iff > 0)."""
    x, y = as_arrays(p, y)
    ev = restricted_eigenvalues(h.values(x, y), y)
    return np.min(np.abs(ev), axis=-1)


def perturbed(h: MultiplierField, eps: float, seed: int = 0) -> MultiplierField:
    """``h + eps * B`` with a fixed random symmetric ``B`` of unit max-entry."""
    n = h.dimension
    rng = np.random.default_rng(seed)
    B = rng.normal(size=(n, n))
    B = 0.5 * (B + B.T)
    B /= np.max(np.abs(B))

    def jetfn(x, y, order):
        hj = h.jets(x, y, order)
        return {(i, j): hj[i][j] + eps * B[i, j] for i in range(n) for j in range(i, n)}

    return MultiplierField(n, jetfn, f"{h.label}+{eps}B")
