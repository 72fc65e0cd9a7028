"""The planar theory: polar profile, periodic potential and flow propagation.

In dimension 2 a degree -1 multiplier with ``h y = 0`` is determined by one
function of the fibre angle, ``tau(theta) = r (h11 + h22)``.  A fibrewise
potential is ``F = r phi(theta)`` with ``phi'' + phi = tau``; it is periodic
(hence globally defined on the punctured fibre) exactly when the first
Fourier coefficients of ``tau`` vanish.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from . import exprlang
from .fields import MultiplierField, SprayField, phase_variables
from .geometry import as_arrays
from .jets import atan, compose, sqrt
from .report import DiagnosticReport
from .sampling import parallel_map

GRID = 4096
PERIOD_TOL = 1e-12
PERIODIC_TOL = 1e-8
TAU_TOL = 1e-7
TWO_PI = 2.0 * np.pi


class TauError(ValueError):
    pass


def theta_grid(N: int = GRID) -> np.ndarray:
    return TWO_PI * np.arange(N) / N


# ---------------------------------------------------------------------------
# periodic profiles


class PlanarProfile:
    """A function of the angle ``theta`` with derivatives.

    Built from an expression in ``t``, a uniform sample table (trigonometric
    interpolation) or a truncated Fourier series.
    """

    def __init__(self, fn, taylor, label: str = "", x=None, periodic_check: bool = True):
        self._fn = fn
        self._taylor = taylor
        self.label = label
        self.x = None if x is None else np.asarray(x, dtype=float)
        if periodic_check:
            t = np.linspace(0.0, TWO_PI, 17)
            a, b = self(t), self(t + TWO_PI)
            dev = float(np.max(np.abs(a - b) / (1.0 + np.abs(a))))
            if dev > PERIOD_TOL:
                raise TauError(f"profile is not 2*pi-periodic (deviation {dev:.2e})")

    def __call__(self, theta):
        return np.asarray(self._fn(np.asarray(theta, dtype=float)), dtype=float)

    def taylor(self, theta, order: int) -> list[np.ndarray]:
        """``[f(theta), f'(theta)/1!, ..., f^(order)(theta)/order!]``."""
        return self._taylor(np.asarray(theta, dtype=float), order)

    def derivative(self, theta, k: int = 1):
        return self.taylor(theta, k)[k] * math.factorial(k)

    def samples(self, N: int = GRID) -> np.ndarray:
        return self(theta_grid(N))

    @classmethod
    def from_expression(cls, text: str, x=None) -> "PlanarProfile":
        expr = exprlang.parse(text, 1, allow_t=True)
        if any(v.kind != "t" for v in expr.variables()):
            raise exprlang.ParseError("a planar profile may only use the variable t", 0, text)

        def fn(theta):
            out = expr.evaluate(t=theta)
            return np.broadcast_to(out, np.shape(theta)).astype(float)

        def taylor(theta, order):
            j = exprlang.evaluate_theta_jet(expr, np.atleast_1d(theta), order)
            return [np.reshape(j.coeffs[k], np.shape(theta)) for k in range(order + 1)]

        return cls(fn, taylor, text, x)

    @classmethod
    def from_series(cls, coeffs: np.ndarray, label: str = "series", x=None) -> "PlanarProfile":
        """``f(theta) = Re sum_k c_k e^{i k theta}`` (``c_0`` real, ``c_k`` already doubled)."""
        c = np.asarray(coeffs, dtype=complex)
        mags = np.abs(c)
        keep = np.nonzero(mags > 1e-15 * max(1.0, float(np.max(mags))))[0]
        last = int(keep[-1]) + 1 if keep.size else 1
        c = c[:last]
        k = np.arange(last)

        def taylor(theta, order):
            th = np.asarray(theta, dtype=float)
            e = np.exp(1j * np.multiply.outer(th, k))
            out = []
            for m in range(order + 1):
                out.append(np.real(e @ (c * (1j * k) ** m)) / math.factorial(m))
            return out

        def fn(theta):
            return taylor(theta, 0)[0]

        prof = cls(fn, taylor, label, x, periodic_check=False)
        prof.coefficients = c
        return prof

    @classmethod
    def from_samples(cls, values, label: str = "samples", x=None) -> "PlanarProfile":
        """Trigonometric interpolant of uniform samples on ``[0, 2 pi)``."""
        v = np.asarray(values, dtype=float).reshape(-1)
        if v.size < 3:
            raise TauError("need at least three samples")
        return cls.from_series(series_coefficients(v), label, x)


def series_coefficients(v: np.ndarray) -> np.ndarray:
    """Coefficients ``c_k`` with ``f = Re sum c_k e^{ik theta}`` from uniform samples."""
    N = v.size
    F = np.fft.rfft(v) / N
    c = 2.0 * F
    c[0] = F[0]
    if N % 2 == 0:
        c[-1] = F[-1]
    return c


def _cumulative_periodic(v: np.ndarray):
    """``int_0^theta f`` split as ``mean * theta + P(theta)`` with periodic ``P(0) = 0``."""
    N = v.size
    F = np.fft.rfft(v)
    mean = F[0].real / N
    k = np.arange(F.size)
    G = np.zeros_like(F)
    G[1:] = F[1:] / (1j * k[1:])
    if N % 2 == 0:
        G[-1] = 0.0
    P = np.fft.irfft(G, n=N)
    return mean, P - P[0]


# ---------------------------------------------------------------------------
# operations


def tau_of(h: MultiplierField, x, n_theta: int = 64, tol: float = TAU_TOL) -> PlanarProfile:
    """``tau(theta) = r (h11 + h22)`` over base point ``x``, checked for consistency."""
    if h.dimension != 2:
        raise ValueError("tau_of needs a planar multiplier")
    x = np.asarray(x, dtype=float)
    t = theta_grid(n_theta)
    X = np.repeat(x[:, None], t.size, axis=1)
    taus = []
    for r in (0.5, 1.0, 2.0):
        Y = r * np.stack([np.cos(t), np.sin(t)])
        hv = h.values(X, Y)
        tr = r * (hv[0, 0] + hv[1, 1])
        taus.append(tr)
        if r == 1.0:
            cons = np.abs(hv[0, 1] + tr * np.sin(t) * np.cos(t))
            scale = 1.0 + np.max(np.abs(tr))
            if np.max(cons) / scale > 1e-8:
                raise TauError(f"h12 inconsistent with the trace (residual {np.max(cons):.2e})")
    dev = max(float(np.max(np.abs(a - taus[1]))) for a in taus) / (1.0 + float(np.max(np.abs(taus[1]))))
    if dev > tol:
        raise TauError(f"r*(h11+h22) depends on r (residual {dev:.2e}); h is not of degree -1")

    def fn(theta):
        th = np.asarray(theta, dtype=float)
        flat = th.reshape(-1)
        Xb = np.repeat(x[:, None], flat.size, axis=1)
        hv = h.values(Xb, np.stack([np.cos(flat), np.sin(flat)]))
        return (hv[0, 0] + hv[1, 1]).reshape(th.shape)

    series = {}

    def taylor(theta, order):
        # derivatives come from the trigonometric interpolant of the exact samples
        if "p" not in series:
            series["p"] = PlanarProfile.from_samples(fn(theta_grid()))
        return series["p"].taylor(theta, order)

    return PlanarProfile(fn, taylor, f"tau({h.label})", x)


def exactness_integrals(tau: PlanarProfile, N: int = GRID) -> tuple[float, float]:
    """``(int tau sin, int tau cos)`` over a period (uniform trapezoid)."""
    t = theta_grid(N)
    v = tau.samples(N)
    w = TWO_PI / N
    return float(w * np.sum(v * np.sin(t))), float(w * np.sum(v * np.cos(t)))


@dataclass
class PlanarSolution:
    theta: np.ndarray
    phi: np.ndarray
    u: np.ndarray
    v: np.ndarray
    periodic: bool
    k1: float
    k2: float
    residual: float
    secular: tuple[float, float]
    periodic_part: PlanarProfile = field(repr=False, default=None)

    def phi_at(self, theta):
        """phi at arbitrary angles (``theta`` in radians, not reduced)."""
        th = np.asarray(theta, dtype=float)
        A, B = self.secular
        return self.periodic_part(th) + th * (A * np.cos(th) + B * np.sin(th))

    @property
    def profile(self) -> PlanarProfile:
        if not self.periodic:
            raise ValueError("no periodic solution: tau has a first-harmonic obstruction")
        return self.periodic_part


def solve_phi(tau: PlanarProfile, N: int = GRID, periodic_tol: float = PERIODIC_TOL) -> PlanarSolution:
    """Particular solution of ``phi'' + phi = tau`` by variation of parameters.

    The first harmonic of the periodic part is removed (it only adds a term
    linear in ``y`` to ``F``).
    """
    t = theta_grid(N)
    tv = tau.samples(N)
    s, c = np.sin(t), np.cos(t)
    ms, Ps = _cumulative_periodic(tv * s)
    mc, Pc = _cumulative_periodic(tv * c)
    u = -(ms * t + Ps)
    v = mc * t + Pc
    I_s, I_c = TWO_PI * ms, TWO_PI * mc
    A, B = -ms, mc
    per = -Ps * c + Pc * s
    coeffs = series_coefficients(per)
    if coeffs.size > 1:
        coeffs[1] = 0.0
    prof = PlanarProfile.from_series(coeffs, f"phi({tau.label})", tau.x)
    d = prof.taylor(t, 2)
    phi = d[0] + t * (A * c + B * s)
    # the secular term satisfies (theta g)'' + theta g = 2 g' exactly
    lhs = 2.0 * d[2] + d[0] + 2.0 * (-A * s + B * c)
    residual = float(np.max(np.abs(lhs - tv)))
    periodic = abs(I_s) < periodic_tol and abs(I_c) < periodic_tol
    return PlanarSolution(t, phi, u, v, periodic, I_c / np.pi, I_s / np.pi, residual, (A, B), prof)


def obstruction_split(tau: PlanarProfile, N: int = GRID):
    """``(k1, k2, tau - k1 cos - k2 sin)``: the first harmonic and the unobstructed rest."""
    I_s, I_c = exactness_integrals(tau, N)
    k1, k2 = I_c / np.pi, I_s / np.pi

    def fn(theta):
        th = np.asarray(theta, dtype=float)
        return tau(th) - k1 * np.cos(th) - k2 * np.sin(th)

    def taylor(theta, order):
        base = tau.taylor(theta, order)
        th = np.asarray(theta, dtype=float)
        out = []
        for m in range(order + 1):
            dc = np.cos(th + m * np.pi / 2)
            ds = np.sin(th + m * np.pi / 2)
            out.append(base[m] - (k1 * dc + k2 * ds) / math.factorial(m))
        return out

    return k1, k2, PlanarProfile(fn, taylor, f"{tau.label} - first harmonic", tau.x)


def hessian_from_phi(phi, x=None, order_hint: int = 4) -> MultiplierField:
    """Planar multiplier ``h = (phi'' + phi)(theta) * (y2^2, -y1 y2, y1^2) / r^3``.

    ``phi`` is a :class:`PlanarProfile`, a periodic :class:`PlanarSolution`, or
    expression text in ``t``.
    """
    if isinstance(phi, PlanarSolution):
        phi = phi.profile
    elif isinstance(phi, str):
        phi = PlanarProfile.from_expression(phi)

    def tau_taylor(theta0, order):
        # Taylor coefficients of phi'' + phi at theta0 up to ``order``
        d = phi.taylor(theta0, order + 2)
        out = []
        for k in range(order + 1):
            # (phi'')^{(k)}/k! = phi^{(k+2)}/k! = d[k+2] (k+2)!/k!
            out.append(d[k + 2] * (k + 2) * (k + 1) + d[k])
        return out

    def jetfn(x, y, order):
        _, ys = phase_variables(x, y, order)
        y1, y2 = ys
        a, b = y[0], y[1]
        theta0 = np.arctan2(b, a)
        dtheta = atan((a * y2 - b * y1) / (a * y1 + b * y2))
        tau = compose(dtheta, tau_taylor(theta0, order))
        r = sqrt(y1 * y1 + y2 * y2)
        r3 = r * r * r
        f = tau / r3
        return {(0, 0): f * y2 * y2, (0, 1): -(f * y1 * y2), (1, 1): f * y1 * y1}

    return MultiplierField(2, jetfn, f"hessian_from_phi({phi.label})")


# ---------------------------------------------------------------------------
# propagation along the flow


@dataclass
class SectionPoint:
    """Initial data at ``(x, y)`` with ``|y| = 1``; ``h`` is extended by degree -1 along the ray.

    ``radial`` optionally supplies ``Delta(h)`` at the point, which must then equal ``-h``.
    """

    x: np.ndarray
    y: np.ndarray
    h: np.ndarray
    radial: np.ndarray | None = None


@dataclass
class Propagation:
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    h: np.ndarray  # (2, 2, len(t))
    eta: float
    lam: float
    left_region: bool


@dataclass
class PropagationResult:
    trajectories: list[Propagation]
    report: DiagnosticReport

    def samples(self):
        """All ``(x, y, h)`` samples, concatenated over trajectories."""
        xs = np.concatenate([p.x for p in self.trajectories], axis=1)
        ys = np.concatenate([p.y for p in self.trajectories], axis=1)
        hs = np.concatenate([p.h for p in self.trajectories], axis=2)
        return xs, ys, hs


class ConstraintError(ValueError):
    pass


class RegionError(ValueError):
    pass


def _spray_derivatives(S: SprayField, x, y):
    """Values, connection and their first derivatives from one order-2 jet."""
    n = 2
    G = S.jets(x, y, 2)
    g = np.array([gk.value for gk in G])
    dg = np.array([[gk.partial(v) for v in range(2 * n)] for gk in G])  # dg[k, v]
    g1 = np.array([[G[k].partial(n + i) for i in range(n)] for k in range(n)])  # Gamma^k_i
    dg1 = np.array([[[G[k].partial(n + i, v) for v in range(2 * n)] for i in range(n)] for k in range(n)])
    return g, dg, g1, dg1


def _rhs(S):
    def f(t, s):
        x, y = s[0:2], s[2:4]
        H = s[4:8].reshape(2, 2)
        dx, dy = s[8:10], s[10:12]
        dH = s[12:16].reshape(2, 2)
        g, dg, g1, dg1 = _spray_derivatives(S, x, y)
        Hdot = g1.T @ H + H @ g1
        dz = np.concatenate([dx, dy])
        dG = np.einsum("kiv,v->ki", dg1, dz)
        dHdot = dG.T @ H + H @ dG + g1.T @ dH + dH @ g1
        return np.concatenate([y, -2.0 * g, Hdot.ravel(), dy, -2.0 * dg @ dz, dHdot.ravel()])

    return f


def propagate_multiplier(S: SprayField, section, T: float = TWO_PI, *, tol: float = 1e-10,
                         samples: int = 101, region: float | None = None,
                         constraint_tol: float = 1e-7, truncate: bool = False) -> PropagationResult:
    """Integrate ``nabla h = 0`` along the flow lines through the section points.

    Alongside ``h`` the flow of the fibre-scaling perturbation is carried, so
    that ``lambda = Delta(h) + h`` can be evaluated on each trajectory as
    ``delta h - t dh/dt + h``.

    With ``region`` set, a flow line that moves farther than ``region`` from
    its start raises :class:`RegionError` unless ``truncate`` is true, in which
    case it is cut short and flagged.
    """
    if S.dimension != 2:
        raise ValueError("propagation is implemented for planar sprays")
    starts = [_section_state(sp, constraint_tol) for sp in section]
    ts = np.linspace(0.0, T, samples)
    rhs = _rhs(S)

    def run(s0):
        events = None
        if region is not None:
            x0 = s0[0:2].copy()

            def leave(t, s):
                return region - np.linalg.norm(s[0:2] - x0)

            leave.terminal = True
            events = [leave]
        sol = solve_ivp(rhs, (0.0, T), s0, method="RK45", rtol=tol, atol=tol, t_eval=ts,
                        events=events)
        if not sol.success:
            raise ArithmeticError(f"flow integration failed: {sol.message}")
        st = sol.y
        H = st[4:8].reshape(2, 2, -1)
        dH = st[12:16].reshape(2, 2, -1)
        y = st[2:4]
        eta = np.einsum("ijm,jm->im", H, y)
        _, _, g1, _ = _spray_derivatives(S, st[0:2], y)
        Hdot = np.einsum("kim,kjm->ijm", g1, H) + np.einsum("ikm,kjm->ijm", H, g1)
        lam = dH - sol.t * Hdot + H
        hit = region is not None and sol.status == 1
        if hit and not truncate:
            raise RegionError(f"flow line from x={s0[0:2]} leaves the probed region at t={sol.t[-1]:.3g}")
        return Propagation(sol.t, st[0:2], y, H, float(np.max(np.abs(eta))),
                           float(np.max(np.abs(lam))), hit)

    trajs = parallel_map(run, starts)
    rep = DiagnosticReport("propagate_multiplier")
    rep.add("eta", max((p.eta for p in trajs), default=0.0), constraint_tol)
    rep.add("lambda", max((p.lam for p in trajs), default=0.0), constraint_tol)
    rep.flags["left_region"] = any(p.left_region for p in trajs)
    return PropagationResult(trajs, rep)


def _section_state(sp: SectionPoint, constraint_tol: float) -> np.ndarray:
    x0 = np.asarray(sp.x, dtype=float)
    y0 = np.asarray(sp.y, dtype=float)
    h0 = np.asarray(sp.h, dtype=float)
    if abs(np.linalg.norm(y0) - 1.0) > 1e-12:
        raise ConstraintError("section fibres must be unit vectors")
    scale = 1.0 + np.max(np.abs(h0))
    if np.max(np.abs(h0 @ y0)) / scale > constraint_tol:
        raise ConstraintError("initial data violate h y = 0")
    if np.max(np.abs(h0 - h0.T)) > constraint_tol:
        raise ConstraintError("initial h is not symmetric")
    radial = -h0 if sp.radial is None else np.asarray(sp.radial, dtype=float)
    if np.max(np.abs(radial + h0)) / scale > constraint_tol:
        raise ConstraintError("initial data violate Delta(h) + h = 0")
    return np.concatenate([x0, y0, h0.ravel(), np.zeros(2), y0, radial.ravel()])


def euclidean_section(xs, ys) -> list[SectionPoint]:
    """Section data ``h = I - y y^T`` (the Euclidean-norm Hessian at unit ``y``)."""
    out = []
    for x, y in zip(np.asarray(xs, float), np.asarray(ys, float)):
        y = y / np.linalg.norm(y)
        out.append(SectionPoint(x, y, np.eye(2) - np.outer(y, y)))
    return out


def multiplier_residual_along(result: PropagationResult, h: MultiplierField) -> float:
    """Max ``|h_propagated - h(x, y)|`` against a known multiplier."""
    x, y, H = result.samples()
    return float(np.max(np.abs(H - h.values(*as_arrays(x, y)))))
