import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spraylab import catalog, finsler, geometry
from spraylab.fields import PhasePoint, ScalarField, SprayField
from spraylab.reconstruct import random_projective_factor
from spraylab.sampling import random_phase_points

NORM = catalog.NORM3
euclid = ScalarField.from_text(NORM, 3)
spiral_F = ScalarField.from_text(catalog.SPIRAL_F, 3)
vec3 = st.lists(st.floats(-2, 2, allow_nan=False), min_size=3, max_size=3).map(np.array)


@pytest.fixture(scope="module")
def spiral():
    return catalog.get("spiral").spray


@pytest.fixture(scope="module")
def samples():
    return random_phase_points(3, 60, seed=21, unit_fibre=False)


def test_homogeneity_euclid(samples):
    rep = finsler.homogeneity_report(euclid, samples)
    assert rep.passed and rep.flags["absolutely_homogeneous"]


def test_homogeneity_spiral_not_absolute(samples):
    rep = finsler.homogeneity_report(spiral_F, samples)
    assert rep.passed and not rep.flags["absolutely_homogeneous"]


def test_energy_fails_degree_one(samples):
    rep = finsler.homogeneity_report(ScalarField.from_text("y1^2+y2^2+y3^2", 3), samples)
    assert not rep.passed
    with pytest.raises(geometry.HomogeneityError):
        finsler.require_degree_one(ScalarField.from_text("y1^2+y2^2+y3^2", 3), samples)


@pytest.mark.parametrize("F", [euclid, spiral_F], ids=["euclid", "spiral"])
def test_tensors_at_origin(F):
    t = finsler.tensors(F, PhasePoint([0, 0, 0], [1, 0, 0]))
    np.testing.assert_allclose(t.h, np.diag([0.0, 1.0, 1.0]), atol=1e-15)
    np.testing.assert_allclose(t.theta, [1.0, 0.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(t.g, np.eye(3), atol=1e-15)


def test_tensor_identities(samples):
    for F in (euclid, spiral_F):
        t = finsler.tensors(F, samples)
        assert t.euler_residual < 1e-9 and t.energy_residual < 1e-9


def test_euclid_hessian_closed_form(samples):
    x, y = samples
    t = finsler.tensors(euclid, x, y)
    r = np.linalg.norm(y, axis=0)
    want = (np.eye(3)[:, :, None] * r ** 2 - y[:, None] * y[None, :]) / r ** 3
    np.testing.assert_allclose(t.h, want, atol=1e-12)


@pytest.mark.parametrize(
    "h, y, minimum, positive",
    [
        (np.diag([0.0, 1.0, 1.0]), [1.0, 0, 0], 1.0, True),
        (np.diag([0.0, 1.0, -1.0]), [1.0, 0, 0], -1.0, False),
        (np.diag([0.0, 2.0, 0.5]), [3.0, 0, 0], 0.5, True),
    ],
)
def test_quasi_definiteness(h, y, minimum, positive):
    qd = finsler.quasi_definiteness(h, np.array(y))
    assert float(qd.minimum) == pytest.approx(minimum)
    assert bool(qd.positive) is positive


def test_quasi_definiteness_euclid_hessian(samples):
    x, y = samples
    qd = finsler.quasi_definiteness(finsler.tensors(euclid, x, y).h, y)
    np.testing.assert_allclose(qd.minimum, 1.0 / np.linalg.norm(y, axis=0), rtol=1e-12)
    assert np.all(qd.premise_ok)


def test_quasi_definiteness_flags_kernel_premise():
    qd = finsler.quasi_definiteness(np.eye(3), np.array([1.0, 0, 0]))
    assert not qd.premise_ok


def test_classify_spiral_origin():
    c = finsler.classify(spiral_F, np.zeros(3))
    assert c.verdict == "Finsler"
    assert c.min_F == pytest.approx(1.0, abs=1e-12)
    assert c.sample_count >= 1000 and c.decomposition_mismatches == 0


def test_classify_spiral_outside_disc():
    c = finsler.classify(spiral_F, np.array([3.0, 0, 0]))
    assert c.verdict == "pseudo-Finsler"
    assert c.min_F == pytest.approx(-0.5, abs=1e-9)
    assert c.decomposition_mismatches == 0


def test_classify_euclid_everywhere():
    for x in ([0, 0, 0], [5, -3, 2]):
        assert finsler.classify(euclid, np.array(x, float)).verdict == "Finsler"


def test_classify_linear_is_degenerate():
    # zero Hessian: no restricted eigenvalue is positive
    c = finsler.classify(ScalarField.from_text("y1 - 2*y3", 3), np.zeros(3))
    assert c.verdict == "degenerate"


@pytest.mark.parametrize("rho", [0.0, 0.5, 1.0, 1.9, 2.5, 3.0])
def test_sphere_minimum_closed_form(rho):
    x = np.array([0.6 * rho, -0.8 * rho, 0.7])
    m, arg, lattice = finsler.sphere_minimum(spiral_F, x)
    assert m == pytest.approx(1 - rho / 2, abs=1e-9)
    assert m <= lattice + 1e-15
    assert np.linalg.norm(arg) == pytest.approx(1.0)


def test_decomposition_on_catalog_fields():
    x = np.random.default_rng(4).uniform(-3, 3, size=(3, 200))
    x[2] = 0.0
    y = np.random.default_rng(5).normal(size=(3, 200))
    for F in (euclid, spiral_F):
        t = finsler.tensors(F, x, y)
        qd = finsler.quasi_definiteness(t.h, y)
        assert finsler.decomposition_mismatches(t, qd) == 0


def test_inequalities_euclid():
    r = finsler.inequality_check(euclid, np.zeros(3), [1.0, 0, 0], [0, 1.0, 0])
    assert r.triangle_slack == pytest.approx(2 - np.sqrt(2))
    assert r.fundamental_slack > 0 and r.consistent


def test_fundamental_equality_on_ray():
    y = np.array([0.3, -1.0, 0.2])
    r = finsler.inequality_check(spiral_F, np.array([0.5, 0.1, 0]), y, 2 * y)
    assert r.fundamental_equality and r.positive_multiple and r.consistent
    assert r.report.passed


def test_fundamental_strict_for_reversed_spiral():
    r = finsler.inequality_check(spiral_F, np.zeros(3), [1.0, 0, 0], [-1.0, 0, 0])
    assert r.fundamental_slack > 0 and not r.fundamental_equality


@pytest.mark.parametrize("y1, y2", [([0, 0, 0], [1.0, 0, 0]), ([1.0, 0, 0], [0, 0, 0])])
def test_inequalities_need_nonzero_vectors(y1, y2):
    with pytest.raises(ValueError):
        finsler.inequality_check(euclid, np.zeros(3), y1, y2)


@settings(max_examples=50, deadline=None)
@given(vec3, vec3)
def test_triangle_slack_never_negative(y1, y2):
    if min(np.linalg.norm(y1), np.linalg.norm(y2)) < 1e-3:
        return
    r = finsler.inequality_check(spiral_F, np.array([0.4, -0.2, 0.0]), y1, y2)
    assert r.triangle_slack > -1e-10
    assert r.fundamental_slack > -1e-10
    assert r.consistent


def test_positivize_worked_example():
    F = ScalarField.from_text(f"{NORM} - 2*y1", 3)
    res = finsler.positivize(F, np.zeros(3), np.array([-1.0, 0, 0]))
    assert res.k == pytest.approx(1.0, abs=1e-3)
    np.testing.assert_allclose(res.alpha, [2.5, 0, 0], atol=1e-3)
    assert res.sphere_min == pytest.approx(0.5, abs=1e-3)
    assert res.plain_min < 0 and res.report.flags["alpha_needed"]
    assert res.radius_estimate > 0


def test_positivize_absolutely_homogeneous():
    F = ScalarField.from_text("sqrt(2*y1^2 + y2^2 + 3*y3^2 + y1*y2)", 3)
    res = finsler.positivize(F, np.zeros(3), np.array([0, 1.0, 0]))
    assert res.plain_min > 0 and not res.report.flags["alpha_needed"]
    assert res.sphere_min > 0


@pytest.mark.parametrize("z", [[1.0, 0, 0], [0.3, -0.4, 2.0]])
def test_positivize_euclid(z):
    res = finsler.positivize(euclid, np.zeros(3), np.array(z))
    assert res.report.passed and res.sphere_min > 0


def test_positivize_requires_quasi_definite():
    F = ScalarField.from_text("y1 + sqrt(y1^2+y2^2+y3^2) - 2*sqrt(y1^2+2*y2^2+y3^2)", 3)
    with pytest.raises(finsler.NotQuasiDefiniteError):
        finsler.positivize(F, np.zeros(3), np.array([1.0, 0, 0]))


def test_best_linear_shift():
    # one fibre over two base points; shifting by alpha = (1, 0, 0) lifts |y| - y1 to |y|
    dirs = np.concatenate([np.eye(3), -np.eye(3)], axis=1)
    base = np.linalg.norm(dirs, axis=0)
    vals = np.stack([base - dirs[0], base - dirs[0] + 0.1])
    alpha, margin = finsler.best_linear_shift(vals, dirs)
    assert margin == pytest.approx(1.0)
    assert alpha[0] == pytest.approx(1.0)


def test_el_residual_flat_euclid(samples):
    assert np.max(np.abs(finsler.el_residual(euclid, SprayField.flat(3), samples))) < 1e-12


def test_el_residual_spiral_pair(spiral, samples):
    assert np.max(np.abs(finsler.el_residual(spiral_F, spiral, samples))) < 1e-8


def test_el_residual_spiral_with_plain_norm(spiral):
    r = finsler.el_residual(euclid, spiral, PhasePoint([0, 0, 0], [1, 0, 0]))
    assert np.max(np.abs(r)) >= 0.1


@pytest.mark.parametrize("seed", range(3))
def test_el_residual_projectively_invariant(spiral, samples, seed):
    F = ScalarField.from_text(f"{NORM} + x3*y1 - x1^2*y2", 3)
    S2 = geometry.projective_change(spiral, random_projective_factor(3, seed))
    a = finsler.el_residual(F, spiral, samples)
    b = finsler.el_residual(F, S2, samples)
    assert np.max(np.abs(a - b)) < 1e-8


def test_rapcsak2_cases(spiral, samples):
    assert np.max(np.abs(finsler.rapcsak2_residual(spiral_F, spiral, samples))) < 1e-8
    assert np.max(np.abs(finsler.rapcsak2_residual(euclid, SprayField.flat(3), samples))) < 1e-12
    assert np.max(np.abs(finsler.rapcsak2_residual(euclid, spiral, samples))) > 0.1


def test_rapcsak_conditions_agree_pairwise(spiral):
    x, y = random_phase_points(3, 40, seed=8)
    for F in (spiral_F, euclid, ScalarField.from_text(f"{NORM} + x2*y1", 3)):
        el = np.max(np.abs(finsler.el_residual(F, spiral, x, y))) < 1e-8
        r2 = np.max(np.abs(finsler.rapcsak2_residual(F, spiral, x, y))) < 1e-8
        assert el == r2


def test_absolutize(samples):
    x, y = samples
    np.testing.assert_allclose(finsler.absolutize(euclid)(x, y), 2 * euclid(x, y), rtol=1e-14)
    a = finsler.absolutize(spiral_F)
    np.testing.assert_allclose(a(x, y), 2 * euclid(x, y), rtol=1e-13)
    assert np.array_equal(a(x, y), a(x, -y))
    assert finsler.homogeneity_report(a, samples).flags["absolutely_homogeneous"]
