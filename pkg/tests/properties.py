"""Property suites shared by the unit tests and the acceptance run.

Each suite returns ``(ok, detail)`` so callers can both assert and report.
"""

import zlib
from itertools import combinations_with_replacement

import numpy as np

from spraylab import catalog, exprlang, geometry, multiplier, planar
from spraylab.fields import ScalarField
from spraylab.sampling import random_phase_points

FD_STEP = 1e-5
FD_RTOL = 1e-5


def catalog_sprays():
    out = []
    for name in catalog.names():
        e = catalog.get(name)
        out.append((e.name, e.spray))
    out.append(("flat2", catalog.get("flat2").spray))
    return out


def catalog_expressions():
    """Every expression text the catalog builds its entries from, with its dimension."""
    exprs = [(t, 3) for t in catalog.SPIRAL] + [(t, 2) for t in catalog.SHEN_CIRCLE]
    exprs += [(catalog.SPIRAL_F, 3), (catalog.SHEN_F, 2)]
    exprs += [(t, 3) for t in catalog.SPIRAL_B]
    exprs += [(catalog.norm_text(n), n) for n in (2, 3, 4)]
    ran = catalog.get("randers_flat")
    exprs.append((ran.scalar.label, 3))
    return exprs


def bracket_suite(points: int = 100):
    worst = 0.0
    bad = []
    for name, S in catalog_sprays():
        x, y = random_phase_points(S.dimension, points, seed=zlib.crc32(name.encode()) % 1000, unit_fibre=False)
        rep = geometry.bracket_residuals(S, x, y)
        worst = max(worst, max(c.value for c in rep.checks))
        if not rep.passed:
            bad.append(name)
    return not bad, f"{len(catalog_sprays())} sprays, max {worst:.1e}" + (f", failing {bad}" if bad else "")


def compat_instance(seed: int):
    """A random admissible multiplier paired with a curl spray.

    Even seeds pair the Euclidean Hessian with a Randers-class spray (every
    curvature form holds); odd seeds use the Hessian of a random constant
    quadratic norm instead, which generically breaks all of them.
    """
    rng = np.random.default_rng(seed)
    B = rng.normal(size=(3, 3))
    b = [" + ".join(f"({B[i, j]:.6f})*x{j + 1}" for j in range(3)) for i in range(3)]
    S = catalog.get("randers_flat", b=b).spray
    if seed % 2 == 0:
        A = np.eye(3)
    else:
        M = rng.normal(size=(3, 3))
        A = M @ M.T + 0.5 * np.eye(3)
    quad = " + ".join(f"({A[i, j]:.6f})*y{i + 1}*y{j + 1}" for i in range(3) for j in range(3))
    h = multiplier.hessian_of(ScalarField.from_text(f"sqrt({quad})", 3))
    return h, S


def compat_suite(instances: int = 50):
    disagree = 0
    premise_bad = 0
    passes = 0
    for seed in range(instances):
        h, S = compat_instance(seed)
        x, y = random_phase_points(3, 20, seed=seed)
        res = multiplier.curvature_compat(h, S, x, y)
        premise_bad += not res.premise_ok
        disagree += not res.agree
        passes += all(res.verdicts)
    ok = disagree == 0 and premise_bad == 0
    return ok, f"{instances} instances, {passes} all-pass, {disagree} disagreements"


def random_trig_profile(rng, degree: int = 6):
    """Random trigonometric polynomial as expression text in ``t``."""
    terms = [f"{rng.uniform(0.5, 2.0):.6f}"]
    for k in range(1, degree + 1):
        a, b = rng.normal(scale=1.0 / k, size=2)
        terms.append(f"({a:.6f})*cos({k}*t) + ({b:.6f})*sin({k}*t)")
    return " + ".join(terms)


def planar_round_trip_suite(count: int = 50, seed: int = 7):
    rng = np.random.default_rng(seed)
    th = np.linspace(0.0, 2 * np.pi, 97)
    worst_rt = worst_ex = worst_ode = 0.0
    bad = 0
    for _ in range(count):
        tau = planar.PlanarProfile.from_expression(random_trig_profile(rng))
        _, _, res = planar.obstruction_split(tau)
        I_s, I_c = planar.exactness_integrals(res)
        sol = planar.solve_phi(res)
        back = planar.tau_of(planar.hessian_from_phi(sol), np.zeros(2))
        rt = float(np.max(np.abs(back(th) - res(th))))
        worst_rt = max(worst_rt, rt)
        worst_ex = max(worst_ex, abs(I_s), abs(I_c))
        worst_ode = max(worst_ode, sol.residual)
        bad += not (sol.periodic and rt < 1e-6 and max(abs(I_s), abs(I_c)) < 1e-8 and sol.residual < 1e-8)
    return bad == 0, (f"{count} profiles, round trip {worst_rt:.1e}, exactness {worst_ex:.1e}, "
                      f"ODE {worst_ode:.1e}")


def _fd_errors(text: str, n: int, points: int = 100, seed: int = 0, max_order: int = 3):
    """Worst relative gap between order-k jet entries and central differences of order-(k-1) entries."""
    expr = exprlang.parse(text, n)
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, size=(n, points))
    y = rng.normal(size=(n, points))
    y /= np.linalg.norm(y, axis=0)
    p = np.concatenate([x, y])
    J = exprlang.evaluate_jet(expr, p, max_order)
    nv = 2 * n
    steps = FD_STEP * np.maximum(1.0, np.abs(p))
    shifted = {}
    for v in range(nv):
        e = np.zeros((nv, 1))
        e[v] = 1.0
        hi = exprlang.evaluate_jet(expr, p + e * steps[v], max_order - 1)
        lo = exprlang.evaluate_jet(expr, p - e * steps[v], max_order - 1)
        shifted[v] = (hi, lo)
    worst = 0.0
    for k in range(1, max_order + 1):
        for combo in combinations_with_replacement(range(nv), k):
            v, rest = combo[0], combo[1:]
            hi, lo = shifted[v]
            fd = (hi.partial(*rest) - lo.partial(*rest)) / (2 * steps[v])
            exact = J.partial(*combo)
            rel = np.abs(exact - fd) / np.maximum(1.0, np.abs(exact))
            worst = max(worst, float(np.max(rel)))
    return worst


def jet_fd_suite():
    worst = 0.0
    bad = []
    exprs = catalog_expressions()
    for text, n in exprs:
        w = _fd_errors(text, n)
        worst = max(worst, w)
        if w >= FD_RTOL:
            bad.append(text)
    return not bad, f"{len(exprs)} expressions, max rel {worst:.1e}" + (f", failing {bad}" if bad else "")
