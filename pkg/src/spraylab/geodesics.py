"""Geodesic integration, shooting and the convexity-radius estimate.

Geodesics solve ``x'' = -2 Gamma(x, x')``.  The radius bound uses a
per-component sup of ``|Gamma^i|`` over unit fibres above a ball, and the
tangency test evaluates the second derivative of ``|x - c|^2 - r^2`` along
geodesics that start tangent to the sphere.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.stats import qmc

from .fields import FIBRE_EPS, SlitBundleError, SprayField
from .report import DiagnosticReport
from .sampling import parallel_map

SHOOT_TOL = 1e-8
SHOOT_MAX_ITER = 50
TANGENCY_TOL = 1e-10
CONVEXITY_SAMPLES = 2 ** 14
SAFETY = 1.05


class IntegrationError(ArithmeticError):
    pass


class ShootingError(ArithmeticError):
    pass


class ConvexityPreconditionError(ValueError):
    pass


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray  # (n, len(t))
    y: np.ndarray
    stats: dict = field(default_factory=dict)

    @property
    def dimension(self) -> int:
        return self.x.shape[0]

    def end(self):
        return self.x[:, -1], self.y[:, -1]

    def write_csv(self, stream) -> None:
        n = self.dimension
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(["t"] + [f"x{i + 1}" for i in range(n)] + [f"y{i + 1}" for i in range(n)])
        for k in range(self.t.size):
            row = [self.t[k], *self.x[:, k], *self.y[:, k]]
            w.writerow([f"{v:.17g}" for v in row])

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        return text


def _rhs(S: SprayField):
    n = S.dimension

    def f(t, s):
        x, y = s[:n], s[n:]
        return np.concatenate([y, -2.0 * S.values(x, y)])

    return f


def _collapse_event(n):
    def ev(t, s):
        return np.linalg.norm(s[n:]) - FIBRE_EPS

    ev.terminal = True
    return ev


def _check_start(S, x0, y0, tol):
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    y0 = np.asarray(y0, dtype=float).reshape(-1)
    n = S.dimension
    if x0.size != n or y0.size != n:
        raise ValueError(f"initial data must have {n} components")
    if not 1e-12 <= tol <= 1e-6:
        raise ValueError("tol must lie in [1e-12, 1e-6]")
    if np.linalg.norm(y0) <= FIBRE_EPS:
        raise SlitBundleError("initial velocity is (numerically) zero")
    return x0, y0


def _solve(S, x0, y0, T, tol, t_eval=None, dense=False):
    n = S.dimension
    sol = solve_ivp(_rhs(S), (0.0, float(T)), np.concatenate([x0, y0]), method="RK45",
                    rtol=tol, atol=tol, t_eval=t_eval, events=[_collapse_event(n)],
                    dense_output=dense)
    if sol.status == 1:
        raise SlitBundleError(f"fibre norm collapsed at t={sol.t_events[0][0]:.6g}")
    if not sol.success:
        raise IntegrationError(f"integration failed: {sol.message}")
    return sol


def integrate(S: SprayField, x0, y0, T: float, tol: float = 1e-10, t_eval=None,
              samples: int = 201) -> Trajectory:
    """Geodesic through ``(x0, y0)`` on ``[0, T]`` (RK45 with ``rtol = atol = tol``)."""
    x0, y0 = _check_start(S, x0, y0, tol)
    if t_eval is None:
        t_eval = np.linspace(0.0, float(T), samples)
    sol = _solve(S, x0, y0, T, tol, np.asarray(t_eval, dtype=float))
    n = S.dimension
    stats = {"nfev": int(sol.nfev), "steps": int(sol.nfev // 6), "status": int(sol.status),
             "tol": tol}
    return Trajectory(sol.t, sol.y[:n], sol.y[n:], stats)


def flow_map(S: SprayField, x0, y0, T: float = 1.0, tol: float = 1e-12) -> np.ndarray:
    """Base points reached at time ``T``; ``y0`` may be a batch of shape (n, m)."""
    n = S.dimension
    Y = np.asarray(y0, dtype=float)
    single = Y.ndim == 1
    Y = Y.reshape(n, -1)
    m = Y.shape[1]
    X = np.repeat(np.asarray(x0, dtype=float).reshape(n, 1), m, axis=1)

    def f(t, s):
        st = s.reshape(2 * n, m)
        return np.concatenate([st[n:], -2.0 * S.values(st[:n], st[n:])]).ravel()

    sol = solve_ivp(f, (0.0, float(T)), np.concatenate([X, Y]).ravel(), method="RK45",
                    rtol=tol, atol=tol, t_eval=[float(T)])
    if not sol.success:
        raise IntegrationError(f"integration failed: {sol.message}")
    out = sol.y[:, -1].reshape(2 * n, m)[:n]
    return out[:, 0] if single else out


def shoot(S: SprayField, x1, x2, T: float = 1.0, y_init=None, *, tol: float = SHOOT_TOL,
          max_iter: int = SHOOT_MAX_ITER, integ_tol: float = 1e-12) -> Trajectory:
    """Geodesic from ``x1`` to ``x2`` on ``[0, T]`` by damped Newton on the initial fibre.

    The Jacobian of the flow map comes from central differences; steps use a
    least-squares solve so that a nearly singular Jacobian (a fold of the
    exponential map) still makes progress.
    """
    x1 = np.asarray(x1, dtype=float).reshape(-1)
    x2 = np.asarray(x2, dtype=float).reshape(-1)
    n = S.dimension
    if x1.size != n or x2.size != n:
        raise ValueError(f"end points must have {n} components")
    if np.linalg.norm(x2 - x1) <= 1e-14:
        raise ValueError("end points coincide; the two-point problem is degenerate")
    y = (x2 - x1) / T if y_init is None else np.asarray(y_init, dtype=float).reshape(-1).copy()
    if np.linalg.norm(y) <= FIBRE_EPS:
        raise SlitBundleError("initial guess lies on the zero section")

    def resid(v):
        return flow_map(S, x1, v, T, integ_tol) - x2

    r = resid(y)
    it = 0
    while np.linalg.norm(r) >= tol:
        if it >= max_iter:
            raise ShootingError(f"no convergence in {max_iter} iterations (residual {np.linalg.norm(r):.2e})")
        it += 1
        step = 1e-5 * max(1.0, np.linalg.norm(y))
        E = step * np.eye(n)
        ends = flow_map(S, x1, np.concatenate([y[:, None] + E, y[:, None] - E], axis=1), T, integ_tol)
        J = (ends[:, :n] - ends[:, n:]) / (2 * step)
        sv = np.linalg.svd(J, compute_uv=False)
        if sv[0] <= 1e-14:
            raise ShootingError("singular shooting Jacobian")
        dy = np.linalg.lstsq(J, -r, rcond=1e-12)[0]
        lam = 1.0
        while True:
            yn = y + lam * dy
            if np.linalg.norm(yn) > FIBRE_EPS:
                rn = resid(yn)
                if np.linalg.norm(rn) < np.linalg.norm(r):
                    break
            lam *= 0.5
            if lam < 1e-6:
                raise ShootingError("singular shooting Jacobian: Newton direction makes no progress"
                                    f" (condition {sv[0] / max(sv[-1], 1e-300):.1e})")
        y, r = yn, rn
    traj = integrate(S, x1, y, T, tol=integ_tol)
    traj.stats.update({"iterations": it, "endpoint_residual": float(np.linalg.norm(r))})
    return traj


# ---------------------------------------------------------------------------
# convexity


@dataclass
class ConvexityEstimate:
    K: float
    r_max: float
    r0: float
    dimension: int
    unbounded: bool
    raw_bound: float  # 1/(2 n K), inf when unbounded
    samples: int
    argmax: tuple

    @property
    def valid(self) -> bool:
        return self.r_max <= self.r0

    def report(self) -> DiagnosticReport:
        rep = DiagnosticReport("convexity_bound")
        rep.flags.update({"K": self.K, "r_max": self.r_max, "r0": self.r0,
                          "unbounded": self.unbounded, "samples": self.samples})
        return rep


def probe_points(n: int, center, r0: float, count: int = CONVEXITY_SAMPLES, seed: int = 0):
    """Joint low-discrepancy sample of ``{|x - c| <= r0} x {|y| = 1}`` plus axis fibres at the centre."""
    from scipy.special import ndtri

    center = np.asarray(center, dtype=float)
    u = qmc.Sobol(2 * n + 1, scramble=True, seed=seed).random(count)
    u = np.clip(u, 1e-12, 1 - 1e-12)
    d = ndtri(u[:, :n])
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    rad = r0 * u[:, n] ** (1.0 / n)
    x = center[:, None] + (d * rad[:, None]).T
    g = ndtri(u[:, n + 1:])
    y = (g / np.linalg.norm(g, axis=1, keepdims=True)).T
    ax = np.concatenate([np.eye(n), -np.eye(n)]).T
    x = np.concatenate([x, np.repeat(center[:, None], ax.shape[1], axis=1)], axis=1)
    y = np.concatenate([y, ax], axis=1)
    return x, y


def convexity_bound(S: SprayField, x_center, r0: float, count: int = CONVEXITY_SAMPLES,
                    seed: int = 0) -> ConvexityEstimate:
    """``K = 1.05 max_i sup |Gamma^i|`` over the probe set and ``r_max = min(r0, 1/(2 n K))``."""
    if not r0 > 0:
        raise ValueError("r0 must be positive")
    n = S.dimension
    x, y = probe_points(n, x_center, r0, count, seed)
    g = np.abs(S.values(x, y))
    if not np.all(np.isfinite(g)):
        raise IntegrationError("spray evaluation failed on the probe set")
    i, m = np.unravel_index(int(np.argmax(g)), g.shape)
    sup = float(g[i, m])
    if sup < 1e-12:
        return ConvexityEstimate(0.0, float(r0), float(r0), n, True, np.inf, x.shape[1], (int(i), int(m)))
    K = SAFETY * sup
    raw = 1.0 / (2 * n * K)
    return ConvexityEstimate(K, min(float(r0), raw), float(r0), n, False, raw, x.shape[1], (int(i), int(m)))


def tangent_starts(n: int, center, r: float, count: int = 100, seed: int = 0):
    """Seeded points on the sphere of radius ``r`` with unit tangent fibres, shapes (n, count)."""
    rng = np.random.default_rng(seed)
    d = rng.normal(size=(count, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    v = rng.normal(size=(count, n))
    v -= np.sum(v * d, axis=1, keepdims=True) * d
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return np.asarray(center, float)[:, None] + r * d.T, v.T


def tangency_check(S: SprayField, x_center, r: float, starts=None, *, count: int = 100,
                   seed: int = 0, confirm_exit: bool = False, estimate: ConvexityEstimate | None = None,
                   tol: float = TANGENCY_TOL) -> DiagnosticReport:
    """Second derivative ``2|y|^2 - 4 (x - c).Gamma(x, y)`` of ``|x - c|^2 - r^2`` at tangent starts."""
    n = S.dimension
    c = np.asarray(x_center, dtype=float)
    est = estimate if estimate is not None else convexity_bound(S, c, r)
    if not est.unbounded and not r < est.raw_bound:
        raise ConvexityPreconditionError(f"r = {r} is not below the convexity bound {est.raw_bound:.6g}")
    if starts is None:
        xs, ys = tangent_starts(n, c, r, count, seed)
    else:
        xs, ys = (np.asarray(a, dtype=float) for a in starts)
    rel = xs - c[:, None]
    on_sphere = float(np.max(np.abs(np.linalg.norm(rel, axis=0) - r)))
    tangency = float(np.max(np.abs(np.sum(rel * ys, axis=0))))
    unit = float(np.max(np.abs(np.linalg.norm(ys, axis=0) - 1.0)))
    if max(on_sphere, tangency, unit) > tol:
        raise ConvexityPreconditionError(
            f"initial data not tangent unit vectors on the sphere (residual {max(on_sphere, tangency, unit):.2e})")
    vals = 2.0 * np.sum(ys * ys, axis=0) - 4.0 * np.sum(rel * S.values(xs, ys), axis=0)
    rep = DiagnosticReport("tangency_check")
    rep.add("second_derivative", float(np.min(vals)), 0.0, relation=">")
    rep.flags["lower_bound"] = 2.0 - 4.0 * n * r * est.K
    rep.flags["samples"] = int(vals.size)
    if confirm_exit:
        def exits(m):
            tr = integrate(S, xs[:, m], ys[:, m], 0.01, tol=1e-12, samples=11)
            V = np.sum((tr.x[:, 1:] - c[:, None]) ** 2, axis=0) - r * r
            return float(np.min(V))

        rep.add("exit", min(parallel_map(exits, range(xs.shape[1]))), 0.0, relation=">")
    return rep
