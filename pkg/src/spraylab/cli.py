"""Command-line front end.

Every subcommand writes one JSON report document (stable key order) to
stdout or ``--report``.  Exit codes: 0 when every check passes, 1 when a
check fails (or a pipeline stage rejects the input), 2 for usage and input
errors.  Any check tolerance can be overridden with ``--tol-<check>``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import re
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__, catalog, exprlang
from .fields import MultiplierField, ScalarField, SlitBundleError, SprayField
from .geometry import bracket_residuals, connection, curvature, validate_spray
from .report import DiagnosticReport, _clean
from .sampling import random_phase_points, sphere_points

REPORT_FORMAT = "spraylab.report/1"
SPRAY_FORMAT = "spraylab.spray/1"
FIELD_FORMAT = "spraylab.field/1"
MULTIPLIER_FORMAT = "spraylab.multiplier/1"
SAMPLED_FORMAT = "spraylab.sampled-field/1"
CURVATURE_TOL = 1e-7


class InputError(ValueError):
    """Bad input: exit code 2."""


@dataclass
class Outcome:
    command: str
    seed: int | None
    inputs: dict = field(default_factory=dict)
    reports: list[DiagnosticReport] = field(default_factory=list)
    verdicts: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)
    error: dict | None = None
    artifacts: dict = field(default_factory=dict)  # python objects for programmatic callers
    report_path: str | None = None

    @property
    def passed(self) -> bool:
        return self.error is None and all(r.passed for r in self.reports)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1

    def document(self) -> dict:
        checks = []
        for r in self.reports:
            checks.extend(c.to_dict() for c in r.checks)
        doc = {
            "format": REPORT_FORMAT,
            "tool": "spraylab",
            "version": __version__,
            "command": self.command,
            "seed": self.seed,
            "inputs": self.inputs,
            "pass": self.passed,
            "checks": checks,
            "verdicts": _clean(self.verdicts),
            "results": _clean(self.results),
        }
        if self.error is not None:
            doc["error"] = self.error
        return doc

    def json(self) -> str:
        return json.dumps(self.document(), indent=2, allow_nan=False) + "\n"


# ---------------------------------------------------------------------------
# inputs


def _digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _read_json(path: str, fmt: str) -> tuple[dict, bytes]:
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(doc, dict) or doc.get("format") != fmt:
        raise InputError(f"{path}: expected a document with format {fmt!r}")
    return doc, raw


def _dimension(doc, path):
    n = doc.get("dimension")
    if not isinstance(n, int) or n < 1:
        raise InputError(f"{path}: dimension must be a positive integer")
    return n


def load_spray(spec: str) -> tuple[SprayField, dict]:
    """Catalog name (``spiral``, ``flat3``, ...) or a spray definition file."""
    if os.path.isfile(spec):
        doc, raw = _read_json(spec, SPRAY_FORMAT)
        n = _dimension(doc, spec)
        coeffs = doc.get("coefficients")
        if not isinstance(coeffs, list) or len(coeffs) != n or not all(isinstance(c, str) for c in coeffs):
            raise InputError(f"{spec}: need {n} coefficient expressions")
        try:
            S = SprayField.from_text(coeffs, doc.get("name", os.path.basename(spec)))
        except exprlang.ParseError as exc:
            raise InputError(f"{spec}: {exc}") from None
        return S, {"source": "file", "path": spec, "sha256": _digest(raw)}
    try:
        entry = catalog.get(spec)
    except (catalog.UnknownEntryError, ValueError):
        raise InputError(f"unknown spray {spec!r} (not a file or catalog name)") from None
    canon = json.dumps({"catalog": spec}, sort_keys=True).encode()
    return entry.spray, {"source": "catalog", "name": spec, "sha256": _digest(canon)}


def load_field(spec: str, n: int) -> tuple[ScalarField, dict]:
    """Catalog field name, field file, or an expression in ``x``/``y``."""
    if os.path.isfile(spec):
        doc, raw = _read_json(spec, FIELD_FORMAT)
        if _dimension(doc, spec) != n:
            raise InputError(f"{spec}: field dimension does not match the spray ({n})")
        try:
            F = ScalarField.from_text(doc.get("expression", ""), n)
        except exprlang.ParseError as exc:
            raise InputError(f"{spec}: {exc}") from None
        return F, {"source": "file", "path": spec, "sha256": _digest(raw)}
    try:
        entry = catalog.get(spec, n=n) if spec in ("euclid_norm", "flat") else catalog.get(spec)
        if entry.scalar is not None:
            if entry.dimension != n:
                raise InputError(f"field {spec!r} has dimension {entry.dimension}, spray has {n}")
            canon = json.dumps({"catalog": spec, "n": n}, sort_keys=True).encode()
            return entry.scalar, {"source": "catalog", "name": spec, "sha256": _digest(canon)}
    except catalog.UnknownEntryError:
        pass
    try:
        F = ScalarField.from_text(spec, n)
    except exprlang.ParseError as exc:
        raise InputError(f"field {spec!r} is neither a catalog field, a file nor an expression ({exc})") from None
    return F, {"source": "expression", "text": spec, "sha256": _digest(spec.encode())}


def _entry_key(key: str, n: int):
    m = re.fullmatch(r"\s*(\d+)\s*,\s*(\d+)\s*", key)
    if not m:
        raise InputError(f"multiplier entry key {key!r} must look like 'i,j'")
    i, j = int(m.group(1)) - 1, int(m.group(2)) - 1
    if not (0 <= i < n and 0 <= j < n):
        raise InputError(f"multiplier entry {key!r} out of range for dimension {n}")
    return (min(i, j), max(i, j))


def load_multiplier(spec: str, n: int) -> tuple[MultiplierField, dict]:
    """``hessian-of:<field>``, a multiplier file, or a catalog entry carrying a multiplier."""
    if spec.startswith("hessian-of:"):
        F, info = load_field(spec[len("hessian-of:"):], n)
        from .multiplier import hessian_of

        return hessian_of(F), {"source": "hessian-of", "field": info, "sha256": info["sha256"]}
    if os.path.isfile(spec):
        doc, raw = _read_json(spec, MULTIPLIER_FORMAT)
        if _dimension(doc, spec) != n:
            raise InputError(f"{spec}: multiplier dimension does not match the spray ({n})")
        entries = doc.get("entries")
        if not isinstance(entries, dict):
            raise InputError(f"{spec}: 'entries' must map 'i,j' to expressions")
        texts = {}
        for k, v in entries.items():
            texts[_entry_key(k, n)] = str(v)
        try:
            h = MultiplierField.from_text(texts, n)
        except exprlang.ParseError as exc:
            raise InputError(f"{spec}: {exc}") from None
        return h, {"source": "file", "path": spec, "sha256": _digest(raw)}
    try:
        entry = catalog.get(spec)
    except (catalog.UnknownEntryError, ValueError):
        raise InputError(f"unknown multiplier {spec!r}") from None
    if entry.multiplier is None or entry.dimension != n:
        raise InputError(f"catalog entry {spec!r} carries no multiplier of dimension {n}")
    canon = json.dumps({"catalog": spec}, sort_keys=True).encode()
    return entry.multiplier, {"source": "catalog", "name": spec, "sha256": _digest(canon)}


def parse_vector(text: str, n: int | None = None, what: str = "vector") -> np.ndarray:
    try:
        v = np.array([float(t) for t in text.replace(" ", "").split(",") if t != ""])
    except ValueError:
        raise InputError(f"{what} must be comma-separated numbers, got {text!r}") from None
    if v.size == 0 or (n is not None and v.size != n):
        raise InputError(f"{what} needs {n} components, got {v.size}")
    return v


def parse_chart(text: str, n: int):
    """``a,b`` for the cube ``[a, b]^n`` or ``a1,b1,...,an,bn``."""
    from .reconstruct import Chart

    v = parse_vector(text, what="chart")
    if v.size == 2:
        lo, hi = [v[0]] * n, [v[1]] * n
    elif v.size == 2 * n:
        lo, hi = list(v[0::2]), list(v[1::2])
    else:
        raise InputError(f"chart needs 2 or {2 * n} numbers")
    if any(b <= a for a, b in zip(lo, hi)):
        raise InputError("chart bounds must satisfy lower < upper")
    return Chart(tuple(float(a) for a in lo), tuple(float(b) for b in hi))


def _norm_check(name: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", name.lower()).strip("-")


def parse_tolerances(extra: list[str]) -> dict:
    out = {}
    k = 0
    while k < len(extra):
        tok = extra[k]
        if not tok.startswith("--tol-"):
            raise InputError(f"unrecognised argument {tok!r}")
        if "=" in tok:
            key, val = tok[6:].split("=", 1)
        else:
            if k + 1 >= len(extra):
                raise InputError(f"{tok} needs a value")
            key, val = tok[6:], extra[k + 1]
            k += 1
        try:
            out[_norm_check(key)] = float(val)
        except ValueError:
            raise InputError(f"{tok}: tolerance must be a number") from None
        k += 1
    return out


def apply_tolerances(reports, tolerances: dict) -> None:
    for r in reports:
        for c in r.checks:
            full = _norm_check(c.name)
            short = _norm_check(c.name.rsplit(".", 1)[-1])
            if full in tolerances:
                c.tolerance = tolerances[full]
            elif short in tolerances:
                c.tolerance = tolerances[short]


def _samples(n, points, seed):
    return random_phase_points(n, points, seed=seed)


# ---------------------------------------------------------------------------
# commands


def cmd_analyze(args) -> Outcome:
    S, info = load_spray(args.spray)
    out = Outcome("analyze", args.seed, {"spray": info})
    x, y = _samples(S.dimension, args.points, args.seed)
    val = validate_spray(S, (x, y))
    out.reports.append(val)
    if not val.passed:
        out.verdicts["spray"] = "not a spray (homogeneity check failed; analysis skipped)"
        return out
    out.reports.append(bracket_residuals(S, x, y))
    cd = curvature(S, x, y)
    con = connection(S, x, y)
    e1, e2 = con.euler_residuals()
    rep = DiagnosticReport("curvature")
    scale = 1.0 + np.max(np.abs(cd.jacobi), axis=(0, 1))
    rep.add("connection_euler", float(np.max(np.abs(e1))), CURVATURE_TOL)
    rep.add("berwald_euler", float(np.max(np.abs(e2))), CURVATURE_TOL)
    ry = np.einsum("ij...,j...->i...", cd.jacobi, y)
    rep.add("jacobi_kernel", float(np.max(np.abs(ry) / scale)), CURVATURE_TOL)
    if cd.weyl_defined:
        wtr = np.einsum("ii...->...", cd.weyl)
        rep.add("weyl_trace", float(np.max(np.abs(wtr) / scale)), CURVATURE_TOL)
        wy = np.einsum("ij...,j...->i...", cd.weyl, y)
        rep.add("weyl_kernel", float(np.max(np.abs(wy) / scale)), CURVATURE_TOL)
    out.reports.append(rep)
    out.results = {
        "dimension": S.dimension,
        "points": args.points,
        "max_abs_jacobi": float(np.max(np.abs(cd.jacobi))),
        "max_abs_weyl": float(np.max(np.abs(cd.weyl))),
        "max_abs_ricci_scalar": float(np.max(np.abs(cd.ricci_scalar))),
        "weyl_defined": bool(cd.weyl_defined),
    }
    out.verdicts["spray"] = "valid"
    out.verdicts["flat_curvature"] = bool(np.max(np.abs(cd.jacobi)) < CURVATURE_TOL)
    return out


def _validated_spray(args, out):
    S, info = load_spray(args.spray)
    out.inputs["spray"] = info
    val = validate_spray(S, _samples(S.dimension, 50, args.seed))
    if not val.passed:
        out.reports.append(val)
        out.error = {"stage": "validate-spray", "message": "coefficients are not homogeneous of degree 2"}
        return None
    return S


def cmd_helmholtz(args) -> Outcome:
    from .multiplier import curvature_compat, helmholtz_report

    out = Outcome("helmholtz", args.seed)
    S = _validated_spray(args, out)
    if S is None:
        return out
    h, info = load_multiplier(args.multiplier, S.dimension)
    out.inputs["multiplier"] = info
    x, y = _samples(S.dimension, args.points, args.seed)
    rep = helmholtz_report(h, S, (x, y))
    out.reports.append(rep)
    compat = curvature_compat(h, S, x, y)
    out.verdicts["conditions"] = {c.name: c.passed for c in rep.checks}
    out.verdicts["curvature_forms_agree"] = bool(compat.agree)
    out.results["curvature_forms"] = {"jacobi": compat.r_form, "cyclic": compat.cyclic_form,
                                      "weyl": compat.w_form}
    out.results["degree_minus_one_residual"] = rep.flags["degree_minus_one_residual"]
    return out


def _probe_points(chart):
    lo, hi = np.asarray(chart.lower), np.asarray(chart.upper)
    n = lo.size
    corners = np.array(np.meshgrid(*[[0, 1]] * n, indexing="ij")).reshape(n, -1)
    pts = lo[:, None] + (hi - lo)[:, None] * corners
    return np.concatenate([chart.center[:, None], pts], axis=1)


def cmd_metrize(args) -> Outcome:
    from . import finsler
    from . import reconstruct as R
    from .fields import phase_variables

    out = Outcome("metrize", args.seed)
    S = _validated_spray(args, out)
    if S is None:
        return out
    n = S.dimension
    if n < 3:
        raise InputError("metrize needs n >= 3; use the planar subcommand in dimension 2")
    h, info = load_multiplier(args.multiplier, n)
    out.inputs["multiplier"] = info
    chart = parse_chart(args.chart, n)
    y0 = parse_vector(args.y0, n, "--y0") if args.y0 else np.eye(n)[0]
    out.inputs["chart"] = {"lower": list(chart.lower), "upper": list(chart.upper)}
    try:
        Fb = R.integrate_hessian(h, y0)
        res = R.rapcsak_correct(Fb, S, chart, seed=args.seed)
    except R.ReconstructionError as exc:
        out.error = {"stage": exc.stage, "message": str(exc),
                     "residual": None if exc.residual is None else float(exc.residual)}
        return out
    out.reports.append(res.report)
    xs = chart.random(args.points, args.seed + 11)
    ys = np.random.default_rng(args.seed + 12).normal(size=(n, args.points))
    ys /= np.linalg.norm(ys, axis=0)
    out.reports.append(R.verify_reconstruction(res, h, S, (xs, ys), seed=args.seed))
    out.artifacts["reconstruction"] = res

    center = chart.center
    try:
        pos = finsler.positivize(res.F.fibre(center), center, y0, count=args.fibre_points, radii=())
    except (finsler.NotQuasiDefiniteError, finsler.PositivizationError) as exc:
        out.error = {"stage": "positivize", "message": str(exc), "residual": None}
        return out
    out.reports.append(pos.report)

    def shifted(base):
        def jetfn(x, y, order):
            _, ys_ = phase_variables(x, y, order)
            return base.jet(x, y, order) + sum(float(alpha[i]) * ys_[i] for i in range(n))

        return ScalarField(n, jetfn, f"{base.label} + alpha.y")

    # best constant gauge over the probe fibres; the centre certificate above shows one exists locally
    probes = _probe_points(chart)
    dirs = sphere_points(n, args.fibre_points).T
    fibres = [res.F.fibre(probes[:, k]) for k in range(probes.shape[1])]
    vals = np.array([f(np.zeros_like(dirs), dirs) for f in fibres])
    alpha, margin = finsler.best_linear_shift(vals, dirs)
    verdicts = []
    for k in range(probes.shape[1]):
        xk = probes[:, k]
        c = finsler.classify(shifted(fibres[k]), xk, count=args.fibre_points)
        verdicts.append({"x": xk.tolist(), "verdict": c.verdict, "min_F": c.min_F,
                         "min_restricted_eigenvalue": c.min_eigenvalue})
    kinds = {v["verdict"] for v in verdicts}
    overall = "Finsler" if kinds == {"Finsler"} else ("degenerate" if "degenerate" in kinds else "pseudo-Finsler")
    out.verdicts["chart"] = overall
    out.verdicts["probes"] = verdicts
    out.results["alpha"] = alpha.tolist()
    out.results["gauge_margin"] = margin
    out.results["centre_alpha"] = pos.alpha.tolist()
    out.results["positivization_k"] = pos.k
    out.results["quadrature_nodes"] = int(Fb.quadrature_nodes_used)
    out.artifacts["alpha"] = alpha
    out.artifacts["F"] = shifted(res.F)
    if args.out:
        grid = chart.grid()
        dirs = np.concatenate([np.eye(n), -np.eye(n)], axis=1)
        X = np.repeat(grid, dirs.shape[1], axis=1)
        Y = np.tile(dirs, grid.shape[1])
        vals = out.artifacts["F"](X, Y)
        doc = {"format": SAMPLED_FORMAT, "dimension": n, "alpha": alpha.tolist(),
               "x": X.T.tolist(), "y": Y.T.tolist(), "F": vals.tolist()}
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(_clean(doc)) + "\n")
        out.results["sampled_field"] = {"path": args.out, "samples": int(vals.size)}
    return out


def load_tau(spec: str):
    from .planar import PlanarProfile

    if os.path.isfile(spec):
        with open(spec, "rb") as fh:
            raw = fh.read()
        try:
            vals = [float(t) for t in raw.decode().split()]
        except ValueError:
            raise InputError(f"{spec}: sample table must hold one number per line") from None
        return PlanarProfile.from_samples(vals, os.path.basename(spec)), {
            "source": "file", "path": spec, "sha256": _digest(raw)}
    try:
        return PlanarProfile.from_expression(spec), {"source": "expression", "text": spec,
                                                     "sha256": _digest(spec.encode())}
    except exprlang.ParseError as exc:
        raise InputError(f"tau: {exc}") from None


def cmd_planar(args) -> Outcome:
    from . import planar as P

    tau, info = load_tau(args.tau)
    out = Outcome("planar", args.seed, {"tau": info})
    I_s, I_c = P.exactness_integrals(tau)
    sol = P.solve_phi(tau)
    k1, k2, tau_res = P.obstruction_split(tau)
    rep = DiagnosticReport("planar")
    rep.add("ode_residual", sol.residual, 1e-8)
    r_s, r_c = P.exactness_integrals(tau_res)
    rep.add("residual_exactness", max(abs(r_s), abs(r_c)), 1e-8)
    if sol.periodic:
        prof = sol.profile
        d0 = prof.taylor(np.array([0.0, 2 * np.pi]), 1)
        rep.add("periodicity", float(max(abs(d0[0][1] - d0[0][0]), abs(d0[1][1] - d0[1][0]))), 1e-8)
    out.reports.append(rep)
    th = np.linspace(0.0, 2 * np.pi, args.table, endpoint=False)
    out.results = {"I_s": I_s, "I_c": I_c, "k1": k1, "k2": k2,
                   "secular": {"cos": sol.secular[0], "sin": sol.secular[1]},
                   "phi_table": {"theta": th.tolist(), "phi": sol.phi_at(th).tolist()}}
    out.verdicts["periodic"] = bool(sol.periodic)
    out.verdicts["fibre_global_metric"] = "exists" if sol.periodic else "obstructed by the first harmonic"
    out.artifacts["solution"] = sol
    return out


def cmd_geodesic(args) -> Outcome:
    from . import geodesics as G

    out = Outcome("geodesic", args.seed)
    S = _validated_spray(args, out)
    if S is None:
        return out
    n = S.dimension
    x0 = parse_vector(args.start, n, "--from")
    y0 = parse_vector(args.dir, n, "--dir")
    if np.linalg.norm(y0) <= 1e-12:
        raise InputError("--dir must be a nonzero vector")
    try:
        traj = G.integrate(S, x0, y0, args.time, tol=args.tol, samples=args.samples)
    except (SlitBundleError, G.IntegrationError) as exc:
        out.error = {"stage": "integrate", "message": str(exc)}
        return out
    rep = DiagnosticReport("geodesic")
    rep.add("min_fibre_norm", float(np.min(np.linalg.norm(traj.y, axis=0))), 1e-12, ">")
    out.reports.append(rep)
    xe, ye = traj.end()
    out.results = {"end_x": xe.tolist(), "end_y": ye.tolist(), "samples": int(traj.t.size),
                   "closure_distance": float(np.linalg.norm(xe - x0)), "nfev": traj.stats["nfev"]}
    if args.out:
        traj.to_csv(args.out)
        with open(args.out, "rb") as fh:
            out.results["csv"] = {"path": args.out, "sha256": _digest(fh.read())}
    out.artifacts["trajectory"] = traj
    return out


def cmd_convexity(args) -> Outcome:
    from . import geodesics as G

    out = Outcome("convexity", args.seed)
    S = _validated_spray(args, out)
    if S is None:
        return out
    n = S.dimension
    c = parse_vector(args.center, n, "--center")
    if not args.r0 > 0:
        raise InputError("--r0 must be positive")
    est = G.convexity_bound(S, c, args.r0, count=args.samples, seed=args.seed)
    out.results = {"K": est.K, "r_max": est.r_max, "r0": est.r0, "raw_bound": est.raw_bound,
                   "samples": est.samples}
    out.verdicts["unbounded_estimate"] = bool(est.unbounded)
    if args.tangency is not None:
        try:
            rep = G.tangency_check(S, c, args.tangency, count=args.tangency_samples, seed=args.seed)
        except G.ConvexityPreconditionError as exc:
            raise InputError(str(exc)) from None
        out.reports.append(rep)
    out.artifacts["estimate"] = est
    return out


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spraylab", description="Projective metrizability diagnostics for sprays.")
    p.add_argument("--version", action="version", version=f"spraylab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=0):
        sp.add_argument("--seed", type=int, default=seed)
        sp.add_argument("--report", help="write the report here instead of stdout")

    a = sub.add_parser("analyze", help="homogeneity, bracket identities and curvature")
    a.add_argument("--spray", required=True)
    a.add_argument("--points", type=int, default=100)
    common(a)

    h = sub.add_parser("helmholtz", help="multiplier conditions for a spray")
    h.add_argument("--spray", required=True)
    h.add_argument("--multiplier", required=True)
    h.add_argument("--points", type=int, default=200)
    common(h)

    m = sub.add_parser("metrize", help="reconstruct and classify a Finsler function")
    m.add_argument("--spray", required=True)
    m.add_argument("--multiplier", required=True)
    m.add_argument("--chart", default="-1,1")
    m.add_argument("--y0", help="reference fibre vector (default e1)")
    m.add_argument("--points", type=int, default=30)
    m.add_argument("--fibre-points", type=int, default=400)
    m.add_argument("--out", help="write sampled F (JSON)")
    common(m)

    pl = sub.add_parser("planar", help="planar profile analysis")
    pl.add_argument("--tau", required=True, help="expression in t or a file of uniform samples")
    pl.add_argument("--table", type=int, default=64)
    common(pl)

    g = sub.add_parser("geodesic", help="integrate a geodesic")
    g.add_argument("--spray", required=True)
    g.add_argument("--from", dest="start", required=True)
    g.add_argument("--dir", required=True)
    g.add_argument("--time", type=float, default=1.0)
    g.add_argument("--tol", type=float, default=1e-10)
    g.add_argument("--samples", type=int, default=201)
    g.add_argument("--out", help="trajectory CSV")
    common(g)

    c = sub.add_parser("convexity", help="convexity radius estimate")
    c.add_argument("--spray", required=True)
    c.add_argument("--center", required=True)
    c.add_argument("--r0", type=float, default=1.0)
    c.add_argument("--samples", type=int, default=2 ** 14)
    c.add_argument("--tangency", type=float, help="run the tangency test at this radius")
    c.add_argument("--tangency-samples", type=int, default=100)
    common(c)
    return p


COMMANDS = {
    "analyze": cmd_analyze,
    "helmholtz": cmd_helmholtz,
    "metrize": cmd_metrize,
    "planar": cmd_planar,
    "geodesic": cmd_geodesic,
    "convexity": cmd_convexity,
}


def run(argv) -> tuple[int, Outcome | None, str]:
    """Parse and run; returns ``(exit code, outcome, message)`` without printing."""
    parser = build_parser()
    try:
        args, extra = parser.parse_known_args(argv)
    except SystemExit as exc:  # argparse usage errors
        return int(exc.code or 0), None, ""
    try:
        tolerances = parse_tolerances(extra)
        outcome = COMMANDS[args.command](args)
    except (InputError, exprlang.ParseError, SlitBundleError, FileNotFoundError) as exc:
        return 2, None, f"spraylab {args.command}: error: {exc}"
    except ValueError as exc:
        return 2, None, f"spraylab {args.command}: error: {exc}"
    apply_tolerances(outcome.reports, tolerances)
    if tolerances:
        outcome.results["tolerance_overrides"] = tolerances
    outcome.report_path = args.report
    return outcome.exit_code, outcome, ""


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    code, outcome, message = run(argv)
    if outcome is None:
        if message:
            print(message, file=sys.stderr)
        return code
    text = outcome.json()
    if outcome.report_path:
        with open(outcome.report_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if outcome.error:
        print(f"spraylab {outcome.command}: {outcome.error['stage']}: {outcome.error['message']}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
