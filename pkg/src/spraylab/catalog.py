"""Built-in sprays and Finsler functions.

The spiral spray on R^3 and its planar restriction (the circle spray) are
written out as expression text.  Randers-type and magnetic sprays for a flat
metric take a covector ``b`` given as three (or n) expressions in ``x``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .fields import MultiplierField, ScalarField, SprayField, fibre_hessian, phase_variables
from .jets import sqrt as jsqrt
from .report import DiagnosticReport

NORM3 = "sqrt(y1^2+y2^2+y3^2)"
NORM2 = "sqrt(y1^2+y2^2)"

SPIRAL = (f"{NORM3}*y2/2", f"-{NORM3}*y1/2", "0")
SHEN_CIRCLE = (f"{NORM2}*y2/2", f"-{NORM2}*y1/2")
SPIRAL_F = f"{NORM3} + 0.5*x2*y1 - 0.5*x1*y2"
SHEN_F = f"{NORM2} + 0.5*x2*y1 - 0.5*x1*y2"
SPIRAL_B = ("0.5*x2", "-0.5*x1", "0")


class UnknownEntryError(KeyError):
    pass


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    dimension: int
    spray: SprayField
    scalar: ScalarField | None = None
    multiplier: MultiplierField | None = None
    note: str = ""
    is_spray: bool = True  # False for the degree-1 magnetic field


def norm_text(n: int) -> str:
    return "sqrt(" + "+".join(f"y{i + 1}^2" for i in range(n)) + ")"


def _covector_fields(b, n):
    if len(b) != n:
        raise ValueError(f"covector needs {n} components")
    return [ScalarField.from_text(str(t), n) for t in b]


def _curl_spray(b, n, with_norm: bool, label: str) -> SprayField:
    """``Gamma^i = 1/2 [|y|] y^j (d_j b_i - d_i b_j)``; derivatives of ``b`` come from its jets."""
    B = _covector_fields(b, n)

    def jetfn(x, y, order):
        Bj = [f.jet(x, y, order + 1) for f in B]
        d = [[Bj[i].diff(j) for j in range(n)] for i in range(n)]  # d[i][j] = d_j b_i
        _, ys = phase_variables(x, y, order)
        scale = 0.5
        if with_norm:
            scale = 0.5 * jsqrt(sum(v * v for v in ys))
        out = []
        for i in range(n):
            acc = 0.0
            for j in range(n):
                if i != j:
                    acc = acc + ys[j] * (d[i][j] - d[j][i])
            out.append(scale * acc)
        return out

    return SprayField(n, jetfn, label)


def _euclid(n):
    F = ScalarField.from_text(norm_text(n), n)
    return CatalogEntry(f"euclid_norm{n}", n, SprayField.flat(n), F, fibre_hessian(F),
                        "Euclidean norm with the flat spray")


def _dimension_suffix(name, base):
    m = re.fullmatch(base + r"(\d+)", name)
    return int(m.group(1)) if m else None


def names() -> list[str]:
    return ["flat", "spiral", "shen_circle", "euclid_norm", "spiral_F", "randers_flat", "magnetic_flat"]


def get(name: str, n: int | None = None, b=None) -> CatalogEntry:
    """Look up a catalog entry.

    ``flat`` and ``euclid_norm`` take a dimension, either as ``n`` or as a
    suffix (``flat3``).  ``randers_flat`` and ``magnetic_flat`` take a
    covector ``b`` of expression strings (default: the spiral potential).
    """
    for base in ("flat", "euclid_norm"):
        k = _dimension_suffix(name, base)
        if k is not None:
            name, n = base, k
    if name == "flat":
        n = 3 if n is None else n
        if n < 1:
            raise ValueError("dimension must be positive")
        return CatalogEntry(f"flat{n}", n, SprayField.flat(n), note="all coefficients zero")
    if name == "euclid_norm":
        return _euclid(3 if n is None else n)
    if name == "spiral":
        F = ScalarField.from_text(SPIRAL_F, 3)
        return CatalogEntry("spiral", 3, SprayField.from_text(SPIRAL, "spiral"), F, fibre_hessian(F),
                            "geodesics are helices about vertical axes")
    if name == "spiral_F":
        F = ScalarField.from_text(SPIRAL_F, 3)
        return CatalogEntry("spiral_F", 3, SprayField.from_text(SPIRAL, "spiral"), F, fibre_hessian(F),
                            "norm plus half the rotation potential")
    if name == "shen_circle":
        F = ScalarField.from_text(SHEN_F, 2)
        return CatalogEntry("shen_circle", 2, SprayField.from_text(SHEN_CIRCLE, "shen_circle"), F,
                            fibre_hessian(F), "unit circles traversed counter-clockwise")
    if name in ("randers_flat", "magnetic_flat"):
        b = SPIRAL_B if b is None else tuple(b)
        dim = len(b)
        if name == "randers_flat":
            Ftext = norm_text(dim) + "".join(f" + ({t})*y{i + 1}" for i, t in enumerate(b))
            F = ScalarField.from_text(Ftext, dim)
            S = _curl_spray(b, dim, True, f"randers_flat{list(b)}")
            return CatalogEntry("randers_flat", dim, S, F, fibre_hessian(F),
                                "constant-speed spray of |y| + b.y")
        S = _curl_spray(b, dim, False, f"magnetic_flat{list(b)}")
        return CatalogEntry("magnetic_flat", dim, S, note="Euler-Lagrange field of |y|^2/2 + b.y",
                            is_spray=False)
    raise UnknownEntryError(name)


# ---------------------------------------------------------------------------
# closed-form spiral geodesics


@dataclass(frozen=True)
class SpiralConstants:
    lam: float
    mu: float
    r: float
    xi: float
    eta: float
    phase: float
    w: float
    z0: float


def spiral_constants(x0, y0) -> SpiralConstants:
    x0 = np.asarray(x0, dtype=float)
    u, v, w = np.asarray(y0, dtype=float)
    lam = math.sqrt(u * u + v * v + w * w)
    if lam == 0.0:
        raise ValueError("initial velocity must be nonzero")
    mu = math.hypot(u, v)
    return SpiralConstants(
        lam=lam,
        mu=mu,
        r=mu / lam,
        xi=x0[0] - v / lam,
        eta=x0[1] + u / lam,
        phase=math.atan2(-u, v),
        w=w,
        z0=x0[2],
    )


def spiral_oracle(x0, y0, t):
    """Exact state ``(x(t), y(t))`` of the spiral geodesic; ``t`` may be an array."""
    c = spiral_constants(x0, y0)
    t = np.asarray(t, dtype=float)
    a = c.lam * t + c.phase
    x = np.stack([c.xi + c.r * np.cos(a), c.eta + c.r * np.sin(a), c.w * t + c.z0])
    y = np.stack([-c.r * c.lam * np.sin(a), c.r * c.lam * np.cos(a), np.full_like(t, c.w)])
    return x, y


# ---------------------------------------------------------------------------
# Randers speed-normalised spray vs magnetic Lagrangian


def magnetic_comparison(b, x0, y0, T: float, *, tol: float = 1e-11, samples: int = 401,
                        path_tol: float = 1e-6, energy_tol: float = 1e-8) -> DiagnosticReport:
    """Compare unit-speed motion under ``|y|^2/2 + b.y`` with the Randers-class spray."""
    from .geodesics import integrate

    y0 = np.asarray(y0, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    speed = float(np.linalg.norm(y0))
    if abs(speed - 1.0) > 1e-12:
        raise ValueError(f"initial Riemannian speed must be 1 (got {speed})")
    mag = get("magnetic_flat", b=b).spray
    ran = get("randers_flat", b=b).spray
    ts = np.linspace(0.0, T, samples)
    tm = integrate(mag, x0, y0, T, tol, t_eval=ts)
    tr = integrate(ran, x0, y0, T, tol, t_eval=ts)
    dist = float(np.max(np.linalg.norm(tm.x - tr.x, axis=0)))
    energy = 0.5 * np.sum(tm.y * tm.y, axis=0)
    drift = float(np.max(np.abs(energy - energy[0])))
    rep = DiagnosticReport("magnetic_comparison")
    rep.add("path_distance", dist, path_tol)
    rep.add("energy_drift", drift, energy_tol)
    return rep
