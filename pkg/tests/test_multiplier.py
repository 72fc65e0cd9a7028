import numpy as np
import pytest

from spraylab import catalog, multiplier
from spraylab.fields import MultiplierField, ScalarField, SprayField
from spraylab.multiplier import InvariantError
from spraylab.sampling import random_phase_points

NORM = catalog.NORM3


@pytest.fixture(scope="module")
def spiral():
    return catalog.get("spiral")


@pytest.fixture(scope="module")
def samples():
    return random_phase_points(3, 80, seed=31, unit_fibre=False)


def test_spiral_pair_passes_all_five(spiral, samples):
    rep = multiplier.helmholtz_report(spiral.multiplier, spiral.spray, samples)
    assert rep.passed
    assert [c.name for c in rep.checks] == list(multiplier.CONDITIONS)
    assert rep.flags["degree_minus_one_residual"] < 1e-7 and rep.flags["weyl_defined"]


def test_identity_over_norm_fails_kernel(spiral, samples):
    inv = ScalarField.from_text(f"1/{NORM}", 3)
    h = MultiplierField.from_entries({(i, i): inv for i in range(3)}, 3)
    rep = multiplier.helmholtz_report(h, spiral.spray, samples)
    assert "kernel" in rep.failures()
    assert rep["symmetry"].passed


def test_curved_metric_fails_nabla_on_flat_spray(samples):
    F = ScalarField.from_text("sqrt((1+x1^2)*y1^2 + y2^2 + y3^2)", 3)
    rep = multiplier.helmholtz_report(multiplier.hessian_of(F), SprayField.flat(3), samples)
    assert rep.failures() == ["nabla"]


def test_tolerance_overrides(spiral, samples):
    rep = multiplier.helmholtz_report(spiral.multiplier, spiral.spray, samples, tolerances={"kernel": -1.0})
    assert rep.failures() == ["kernel"]


def test_hessian_of_euclid_closed_form(samples):
    x, y = samples
    h = multiplier.hessian_of(ScalarField.from_text(NORM, 3)).values(x, y)
    r = np.linalg.norm(y, axis=0)
    want = (np.eye(3)[:, :, None] * r ** 2 - y[:, None] * y[None, :]) / r ** 3
    np.testing.assert_allclose(h, want, atol=1e-10)


def test_hessian_of_linear_is_zero(samples):
    h = multiplier.hessian_of(ScalarField.from_text("x1*y1 - 3*y2 + exp(x3)*y3", 3))
    assert not np.any(h.values(*samples))


def test_hessian_of_spiral_equals_euclid(spiral, samples):
    a = spiral.multiplier.values(*samples)
    b = multiplier.hessian_of(ScalarField.from_text(NORM, 3)).values(*samples)
    np.testing.assert_allclose(a, b, atol=1e-14)


def test_hessian_jets_agree_with_fast_values(samples):
    h = multiplier.hessian_of(ScalarField.from_text(catalog.SPIRAL_F + " + x1*x3*y2", 3))
    a = h.values(*samples)
    b = np.array([[e.value for e in row] for row in h.jets(*samples, 1)])
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-15)


def test_spiral_curvature_compat(spiral, samples):
    res = multiplier.curvature_compat(spiral.multiplier, spiral.spray, samples)
    assert max(res.r_form, res.cyclic_form, res.w_form) < 1e-7
    assert res.agree and res.premise_ok


def test_flat_compat_is_zero(samples):
    h = catalog.get("euclid_norm3").multiplier
    res = multiplier.curvature_compat(h, SprayField.flat(3), samples)
    assert res.r_form == res.cyclic_form == res.w_form == 0.0


def test_broken_curvature_forms_agree(spiral, samples):
    # admissible multiplier of a different quadratic norm violates all three forms together
    F = ScalarField.from_text("sqrt(2*y1^2 + y2^2 + y3^2 + y1*y3)", 3)
    res = multiplier.curvature_compat(multiplier.hessian_of(F), spiral.spray, samples)
    assert res.premise_ok and res.agree
    assert res.verdicts == (False, False, False)


def test_compat_flags_broken_premise(spiral, samples):
    res = multiplier.curvature_compat(multiplier.perturbed(spiral.multiplier, 1e-2), spiral.spray, samples)
    assert not res.premise_ok
    assert res.report.flags["premise_ok"] is False


def test_planar_compat_reports_jacobi_form():
    shen = catalog.get("shen_circle")
    x, y = random_phase_points(2, 20, seed=3)
    res = multiplier.curvature_compat(shen.multiplier, shen.spray, x, y)
    assert res.w_form == res.r_form and res.agree
    assert "weyl_note" in res.report.flags


def test_nabla_invariance_spiral(spiral, samples):
    P = ScalarField.from_text(f"0.1*{NORM}", 3)
    rep = multiplier.nabla_projective_invariance(spiral.multiplier, spiral.spray, P, samples)
    assert rep.passed and rep.flags["hypothesis_ok"]


def test_nabla_invariance_zero_factor(spiral, samples):
    rep = multiplier.nabla_projective_invariance(spiral.multiplier, spiral.spray,
                                                 ScalarField.constant(0.0, 3), samples)
    assert rep["difference"].value == 0.0


def test_nabla_invariance_needs_degree_minus_one(spiral, samples):
    one = ScalarField.constant(1.0, 3)
    energy = MultiplierField.from_entries({(i, i): one for i in range(3)}, 3, "delta")
    P = ScalarField.from_text(f"0.1*{NORM}", 3)
    rep = multiplier.nabla_projective_invariance(energy, spiral.spray, P, samples)
    assert not rep.passed and not rep.flags["hypothesis_ok"]


def test_scale_2d_identity_and_constant():
    S = SprayField.flat(2)
    h = catalog.get("euclid_norm2").multiplier
    x, y = random_phase_points(2, 30, seed=4)
    same = multiplier.scale_2d(h, ScalarField.constant(1.0, 2), S)
    np.testing.assert_array_equal(same.values(x, y), h.values(x, y))
    twice = multiplier.scale_2d(h, ScalarField.constant(2.0, 2), S)
    assert multiplier.helmholtz_report(twice, S, (x, y)).passed


def test_scale_2d_with_flow_invariant():
    # for the flat planar spray the direction angle is a degree-0 first integral
    S = SprayField.flat(2)
    h = catalog.get("euclid_norm2").multiplier
    f = ScalarField.from_text("2 + y1/sqrt(y1^2+y2^2)", 2)
    x, y = random_phase_points(2, 30, seed=5)
    assert multiplier.helmholtz_report(multiplier.scale_2d(h, f, S), S, (x, y)).passed


def test_scale_2d_rejects_non_invariant():
    shen = catalog.get("shen_circle")
    with pytest.raises(InvariantError, match="first integral"):
        multiplier.scale_2d(shen.multiplier, ScalarField.from_text("y1/y2", 2), shen.spray,
                            samples=(np.array([[0.1], [0.2]]), np.array([[1.0], [2.0]])))
    with pytest.raises(InvariantError, match="degree 0"):
        multiplier.scale_2d(shen.multiplier, ScalarField.from_text("y1", 2), shen.spray)


def test_scale_2d_only_planar(spiral):
    with pytest.raises(ValueError):
        multiplier.scale_2d(spiral.multiplier, ScalarField.constant(1.0, 3), spiral.spray)


@pytest.mark.parametrize("name", ["spiral", "euclid_norm3", "randers_flat", "shen_circle"])
def test_finsler_hessians_are_quasi_regular(name):
    e = catalog.get(name)
    x, y = random_phase_points(e.dimension, 50, seed=6, unit_fibre=False)
    assert np.min(multiplier.quasi_regularity(e.multiplier, x, y)) > 1e-9


def test_conditions_imply_degree_minus_one():
    rng = np.random.default_rng(0)
    for _ in range(5):
        a = rng.uniform(0.5, 2.0, 3)
        F = ScalarField.from_text(f"sqrt({a[0]:.4f}*y1^2 + {a[1]:.4f}*y2^2 + {a[2]:.4f}*y3^2*(1+x1^2))", 3)
        rep = multiplier.helmholtz_report(multiplier.hessian_of(F), SprayField.flat(3),
                                          random_phase_points(3, 20, seed=1))
        assert all(rep[c].passed for c in ("symmetry", "kernel", "closedness"))
        assert rep.flags["degree_minus_one_residual"] < 1e-7
