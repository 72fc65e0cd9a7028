"""Candidate Finsler functions: tensors, positivity, convexity and Euler-Lagrange residuals."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import ScalarField, SprayField, fibre_reversed
from .geometry import HomogeneityError, as_arrays, homogeneity_residual
from .report import DiagnosticReport
from .sampling import sphere_points

POSITIVITY_TOL = 1e-9
RESIDUAL_TOL = 1e-7
EQUALITY_TOL = 1e-10
KERNEL_TOL = 1e-7


class NotQuasiDefiniteError(ValueError):
    pass


class PositivizationError(ArithmeticError):
    pass


# ---------------------------------------------------------------------------
# homogeneity and tensors


def homogeneity_report(F: ScalarField, samples, tol: float = 1e-9) -> DiagnosticReport:
    """Degree-1 Euler residual (checked) and reversal asymmetry (informational flag)."""
    x, y = as_arrays(samples)
    Fv = F(x, y)
    euler = np.abs(homogeneity_residual(F, x, y, 1.0)) / (1.0 + np.abs(Fv))
    asym = np.abs(F(x, -y) - Fv) / (1.0 + np.abs(Fv))
    rep = DiagnosticReport("homogeneity")
    rep.add("positive_homogeneity", float(np.max(euler)), tol)
    rep.flags["reversal_asymmetry"] = float(np.max(asym))
    rep.flags["absolutely_homogeneous"] = bool(np.max(asym) < tol)
    return rep


@dataclass
class FinslerTensors:
    """``theta_i = dF/dy^i``, ``h_ij = d^2F/dy^i dy^j``, ``g_ij = F h_ij + theta_i theta_j``."""

    F: np.ndarray
    theta: np.ndarray
    h: np.ndarray
    g: np.ndarray
    y: np.ndarray
    euler_residual: float
    energy_residual: float


def tensors(F: ScalarField, p, y=None) -> FinslerTensors:
    x, y = as_arrays(p, y)
    n = F.dimension
    j = F.jet(x, y, 2)
    theta = np.array([j.partial(n + i) for i in range(n)])
    h = np.array([[j.partial(n + a, n + b) for b in range(n)] for a in range(n)])
    Fv = j.value
    g = Fv * h + theta[:, None] * theta[None, :]
    hy = np.einsum("ij...,j...->i...", h, y)
    gyy = np.einsum("ij...,i...,j...->...", g, y, y)
    scale = 1.0 + np.max(np.abs(h))
    euler = float(np.max(np.abs(hy)) / scale)
    energy = float(np.max(np.abs(gyy - Fv * Fv) / (1.0 + Fv * Fv)))
    return FinslerTensors(Fv, theta, h, g, y, euler, energy)


def complement_basis(y: np.ndarray) -> np.ndarray:
    """Orthonormal basis of ``y``'s orthogonal complement, shape ``(n, n-1, *batch)``.

    Uses the Householder reflection taking ``e_1`` to ``y/|y|`` (up to sign).
    """
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    yh = y / np.linalg.norm(y, axis=0)
    sign = np.where(yh[0] >= 0, 1.0, -1.0)
    v = yh.copy()
    v[0] = v[0] + sign
    vv = np.sum(v * v, axis=0)
    eye = np.eye(n).reshape((n, n) + (1,) * (y.ndim - 1))
    H = eye - 2.0 * v[:, None] * v[None, :] / vv
    return H[:, 1:]


@dataclass
class QuasiDefiniteness:
    minimum: np.ndarray
    eigenvalues: np.ndarray
    kernel_residual: np.ndarray
    premise_ok: np.ndarray

    @property
    def positive(self):
        return (self.minimum > POSITIVITY_TOL) & self.premise_ok


def restricted_eigenvalues(h: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Spectrum of ``h`` on ``y``'s complement; shape ``(*batch, n-1)``, ascending."""
    E = complement_basis(y)
    M = np.einsum("ia...,ij...,jb...->...ab", E, h, E)
    return np.linalg.eigvalsh(M)


def quasi_definiteness(h, y, kernel_tol: float = KERNEL_TOL) -> QuasiDefiniteness:
    """Minimum eigenvalue of ``h`` restricted to the complement of ``y``.

    ``premise_ok`` is False where ``h y`` is not (relatively) zero, in which
    case ``y`` is not in the kernel and the restriction says little.
    """
    h = np.asarray(h, dtype=float)
    y = np.asarray(y, dtype=float)
    ev = restricted_eigenvalues(h, y)
    yh = y / np.linalg.norm(y, axis=0)
    hy = np.einsum("ij...,j...->i...", h, yh)
    scale = 1.0 + np.max(np.abs(h), axis=(0, 1))
    kres = np.linalg.norm(hy, axis=0) / scale
    return QuasiDefiniteness(ev[..., 0], ev, kres, kres < kernel_tol)


# ---------------------------------------------------------------------------
# classification on a fibre


def _tangent_newton(F: ScalarField, x, u, steps: int = 30):
    """Newton iterations for a critical point of ``F(x, .)`` on the unit sphere."""
    n = u.size
    xx = x[:, None]
    for _ in range(steps):
        t = tensors(F, xx, u[:, None])
        E = complement_basis(u[:, None])[:, :, 0]
        grad = E.T @ t.theta[:, 0]
        # Riemannian Hessian of a degree-1 function on the sphere
        hess = E.T @ t.h[:, :, 0] @ E - t.F[0] * np.eye(n - 1)
        if np.linalg.norm(grad) < 1e-15:
            break
        w = np.linalg.eigvalsh(hess)
        if w[0] > 1e-10:
            step = -np.linalg.solve(hess, grad)
        else:
            step = -0.5 * grad
        nrm = np.linalg.norm(step)
        if nrm > 0.5:
            step *= 0.5 / nrm
        u = u + E @ step
        u /= np.linalg.norm(u)
    return u


@dataclass
class Classification:
    verdict: str
    min_F: float
    argmin_F: np.ndarray
    min_eigenvalue: float
    sample_count: int
    decomposition_mismatches: int
    lattice_min_F: float
    report: DiagnosticReport = field(repr=False, default=None)


def sphere_minimum(F: ScalarField, x, pts=None, *, polish: int = 5):
    """Minimum of ``F(x, .)`` on the unit sphere: lattice, then Newton polish of the best points."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if pts is None:
        pts = sphere_points(n, 2000)
    vals = F(np.repeat(x[:, None], len(pts), axis=1), pts.T)
    best = float(np.min(vals))
    arg = pts[int(np.argmin(vals))]
    lattice = best
    for idx in np.argsort(vals)[:polish]:
        u = _tangent_newton(F, x, pts[idx].copy())
        v = float(F(x, u))
        if v < best:
            best, arg = v, u
    return best, arg, lattice


def classify(F: ScalarField, x, count: int = 2000, tol: float = POSITIVITY_TOL) -> Classification:
    """Finsler / pseudo-Finsler / degenerate verdict on the fibre over ``x``."""
    x = np.asarray(x, dtype=float)
    n = x.size
    pts = sphere_points(n, count)
    X = np.repeat(x[:, None], len(pts), axis=1)
    Y = pts.T
    t = tensors(F, X, Y)
    qd = quasi_definiteness(t.h, Y)
    min_eig = float(np.min(np.where(qd.premise_ok, qd.minimum, -np.inf)))
    min_F, arg, lattice = sphere_minimum(F, x, pts)
    if min_eig > tol and min_F > tol:
        verdict = "Finsler"
    elif min_eig > tol:
        verdict = "pseudo-Finsler"
    else:
        verdict = "degenerate"
    mismatches = decomposition_mismatches(t, qd)
    rep = DiagnosticReport("classify")
    rep.add("min_F", min_F, tol, ">")
    rep.add("min_restricted_eigenvalue", min_eig, tol, ">")
    rep.add("decomposition_mismatches", mismatches, 0.5)
    rep.flags["verdict"] = verdict
    return Classification(verdict, min_F, arg, min_eig, len(pts), mismatches, lattice, rep)


def decomposition_mismatches(t: FinslerTensors, qd: QuasiDefiniteness, f_floor: float = 1e-4) -> int:
    """Samples where "g positive definite" and "F > 0 with h positive quasi-definite" disagree.

    The smallest eigenvalue of ``g`` scales like ``F^2``, so samples with
    ``|F| < f_floor`` are skipped (signs there are at rounding level).
    """
    g_eig = np.linalg.eigvalsh(np.moveaxis(t.g, (0, 1), (-2, -1)))[..., 0]
    g_pd = g_eig > 0.0
    rhs = (t.F > 0.0) & (qd.minimum > 0.0) & qd.premise_ok
    considered = np.abs(t.F) > f_floor
    return int(np.sum((g_pd != rhs) & considered))


# ---------------------------------------------------------------------------
# inequalities


@dataclass
class InequalityResult:
    triangle_slack: float
    fundamental_slack: float
    triangle_equality: bool
    fundamental_equality: bool
    positive_multiple: bool
    consistent: bool
    report: DiagnosticReport = field(repr=False, default=None)


def inequality_check(F: ScalarField, x, y1, y2) -> InequalityResult:
    """Triangle inequality for ``(y1, y2)`` and fundamental inequality with ``y = y1``, ``z = y2``.

    Equality may only occur when ``y2`` is a positive multiple of ``y1``.
    """
    x = np.asarray(x, dtype=float)
    y1 = np.asarray(y1, dtype=float)
    y2 = np.asarray(y2, dtype=float)
    if np.linalg.norm(y1) <= 1e-12 or np.linalg.norm(y2) <= 1e-12:
        raise ValueError("both fibre vectors must be nonzero")
    n = x.size
    tri = float(F(x, y1) + F(x, y2) - F(x, y1 + y2))
    j = F.jet(x, y1, 1)
    theta = np.array([j.partial(n + i) for i in range(n)])
    fund = float(F(x, y2) - theta @ y2)
    cross = np.linalg.norm(y2 * np.linalg.norm(y1) ** 2 - y1 * (y1 @ y2))
    parallel = bool(cross < 1e-12 * (1 + np.linalg.norm(y1) ** 2 * np.linalg.norm(y2)) and y1 @ y2 > 0)
    tri_eq = abs(tri) < EQUALITY_TOL
    fund_eq = abs(fund) < EQUALITY_TOL
    consistent = (not fund_eq or parallel) and (not tri_eq or parallel)
    rep = DiagnosticReport("inequalities")
    rep.add("triangle_slack", tri, -EQUALITY_TOL, ">")
    rep.add("fundamental_slack", fund, -EQUALITY_TOL, ">")
    rep.add("equality_only_on_rays", 0.0 if consistent else 1.0, 0.5)
    rep.flags.update(triangle_equality=tri_eq, fundamental_equality=fund_eq, positive_multiple=parallel)
    return InequalityResult(tri, fund, tri_eq, fund_eq, parallel, consistent, rep)


# ---------------------------------------------------------------------------
# positivization


@dataclass
class PositivizationResult:
    alpha: np.ndarray
    k: float
    z: np.ndarray
    hemisphere_argmin: np.ndarray
    sphere_min: float
    plain_min: float
    radius_estimate: float
    report: DiagnosticReport = field(repr=False, default=None)

    def field(self, F: ScalarField) -> ScalarField:
        """``F + alpha . y`` as a field."""
        from .fields import phase_variables

        a = self.alpha

        def jetfn(x, y, order):
            _, ys = phase_variables(x, y, order)
            return F.jet(x, y, order) + sum(float(a[i]) * ys[i] for i in range(F.dimension))

        return ScalarField(F.dimension, jetfn, f"{F.label} + alpha.y")


def _hemisphere_descent(fun_grad, u, zh, iters=20):
    for it in range(iters):
        _, g = fun_grad(u)
        g = g - (g @ u) * u
        u = u - 0.1 / (1 + it) * g
        if u @ zh > 0:
            u = u - (u @ zh) * zh
        u = u / np.linalg.norm(u)
    return u


def positivize(F: ScalarField, x, z, count: int = 2000,
               radii=(0.025, 0.05, 0.1, 0.2, 0.4, 0.8)) -> PositivizationResult:
    """Find a linear ``alpha . y`` making ``F + alpha . y`` positive on the fibre over ``x``.

    ``Fb(y) = F(y) - y . theta(z)`` vanishes along ``z`` and is positive off it;
    with ``k`` the minimum of ``Fb`` over the closed hemisphere ``{u . z <= 0}``,
    ``alpha = k z/(2|z|) - theta(z)`` works.
    """
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    n = x.size
    zh = z / np.linalg.norm(z)
    pts = sphere_points(n, count)
    X = np.repeat(x[:, None], len(pts), axis=1)
    t = tensors(F, X, pts.T)
    qd = quasi_definiteness(t.h, pts.T)
    if not np.all(qd.positive):
        raise NotQuasiDefiniteError(
            f"Hessian not positive quasi-definite over x (min {float(np.min(qd.minimum)):.3e})"
        )
    jz = F.jet(x, z, 1)
    theta_z = np.array([jz.partial(n + i) for i in range(n)])

    def fbar(u):
        v = F.jet(x, u, 1)
        val = float(v.value) - theta_z @ u
        grad = np.array([v.partial(n + i) for i in range(n)]) - theta_z
        return val, grad

    fb = t.F - theta_z @ pts.T
    hemi = pts @ zh <= 1e-12
    cand = np.where(hemi)[0]
    order = cand[np.argsort(fb[cand])]
    k = float(fb[order[0]])
    arg = pts[order[0]]
    for idx in order[:5]:
        u = _hemisphere_descent(fbar, pts[idx].copy(), zh)
        val = fbar(u)[0]
        if val < k:
            k, arg = val, u
    if not k > 0:
        raise PositivizationError(f"hemisphere minimum k = {k:.3e} is not positive")
    alpha = 0.5 * k * zh - theta_z
    shifted = t.F + alpha @ pts.T
    sphere_min = float(np.min(shifted))
    plain_min = float(np.min(t.F))

    radius = 0.0
    grid = np.array(np.meshgrid(*[[-1.0, 0.0, 1.0]] * n, indexing="ij")).reshape(n, -1).T
    for r in radii:
        ok = True
        for off in grid:
            xb = x + r * off
            Xb = np.repeat(xb[:, None], len(pts), axis=1)
            if np.min(F(Xb, pts.T) + alpha @ pts.T) <= POSITIVITY_TOL:
                ok = False
                break
        if not ok:
            break
        radius = r
    rep = DiagnosticReport("positivize")
    rep.add("k", k, 0.0, ">")
    rep.add("sphere_min", sphere_min, POSITIVITY_TOL, ">")
    rep.flags["alpha_needed"] = bool(plain_min <= POSITIVITY_TOL)
    rep.flags["neighbourhood_radius"] = radius
    return PositivizationResult(alpha, k, zh, arg, sphere_min, plain_min, radius, rep)


def best_linear_shift(values: np.ndarray, dirs: np.ndarray, bound: float = 1e3):
    """Constant ``alpha`` maximising ``min_{p,k} values[p, k] + alpha . dirs[:, k]``.

    ``values`` holds ``F`` on unit fibres ``dirs`` (shape (n, m)) over several
    base points.  Adding ``alpha . y`` changes ``F`` by a total derivative,
    so this picks the best such gauge for a whole chart.  The problem is a
    small linear program; returns ``(alpha, margin)``.
    """
    from scipy.optimize import linprog

    V = np.atleast_2d(np.asarray(values, dtype=float))
    U = np.asarray(dirs, dtype=float)
    n, m = U.shape
    p = V.shape[0]
    # variables (alpha, t): maximise t subject to t - alpha.u_k <= V[p, k]
    A = np.concatenate([-np.tile(U.T, (p, 1)), np.ones((p * m, 1))], axis=1)
    c = np.zeros(n + 1)
    c[-1] = -1.0
    res = linprog(c, A_ub=A, b_ub=V.reshape(-1), bounds=[(-bound, bound)] * n + [(None, None)],
                  method="highs")
    if not res.success:
        raise PositivizationError(f"linear program for the gauge failed: {res.message}")
    return res.x[:n], float(res.x[-1])


# ---------------------------------------------------------------------------
# Euler-Lagrange residuals


def _theta_jets(F: ScalarField, x, y):
    n = F.dimension
    j = F.jet(x, y, 2)
    return j, [j.diff(n + i) for i in range(n)]


def el_residual(F: ScalarField, S: SprayField, p, y=None) -> np.ndarray:
    """``Gamma(dF/dy^i) - dF/dx^i``, shape ``(n, *batch)``."""
    x, y = as_arrays(p, y)
    n = F.dimension
    j, th = _theta_jets(F, x, y)
    g = S.values(x, y)
    out = []
    for i in range(n):
        d = sum(y[k] * th[i].partial(k) - 2.0 * g[k] * th[i].partial(n + k) for k in range(n))
        out.append(d - j.partial(i))
    return np.array(out)


def horizontal_theta(F: ScalarField, S: SprayField, x, y) -> np.ndarray:
    """``M[i, j] = H_i(theta_j) = d^2F/dx^i dy^j - Gamma^k_i h_jk``."""
    n = F.dimension
    j, th = _theta_jets(F, x, y)
    G = S.jets(x, y, 1)
    g1 = np.array([[G[k].partial(n + i) for i in range(n)] for k in range(n)])  # g1[k,i]=Gamma^k_i
    M = np.empty((n, n) + x.shape[1:])
    for i in range(n):
        for jj in range(n):
            M[i, jj] = th[jj].partial(i) - sum(g1[k, i] * th[jj].partial(n + k) for k in range(n))
    return M


def rapcsak2_residual(F: ScalarField, S: SprayField, p, y=None) -> np.ndarray:
    """``A_ij = H_i(theta_j) - H_j(theta_i)`` (antisymmetric)."""
    x, y = as_arrays(p, y)
    M = horizontal_theta(F, S, x, y)
    return M - np.swapaxes(M, 0, 1)


def absolutize(F: ScalarField) -> ScalarField:
    """``F(x, y) + F(x, -y)``."""
    R = fibre_reversed(F)
    n = F.dimension
    return ScalarField(n, lambda x, y, o: F.jet(x, y, o) + R.jet(x, y, o), f"abs({F.label})")


def require_degree_one(F: ScalarField, samples, tol: float = 1e-9):
    rep = homogeneity_report(F, samples, tol)
    if not rep.passed:
        raise HomogeneityError(
            f"F is not positively homogeneous of degree 1 (residual {rep['positive_homogeneity'].value:.2e})"
        )
