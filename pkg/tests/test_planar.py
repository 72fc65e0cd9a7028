import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spraylab import catalog, exprlang, planar
from spraylab.fields import MultiplierField, ScalarField, SprayField, fibre_hessian
from spraylab.planar import ConstraintError, PlanarProfile, RegionError, SectionPoint, TauError

TH = np.linspace(0.0, 2 * np.pi, 129)


def profile(text):
    return PlanarProfile.from_expression(text)


def test_tau_of_euclidean_norm():
    tau = planar.tau_of(catalog.get("euclid_norm2").multiplier, np.zeros(2))
    np.testing.assert_allclose(tau(TH), 1.0, atol=1e-10)


def test_tau_of_shen_circle():
    # the Shen function differs from |y| by a linear term
    tau = planar.tau_of(catalog.get("shen_circle").multiplier, np.array([0.3, -0.7]))
    np.testing.assert_allclose(tau(TH), 1.0, atol=1e-10)


def test_tau_of_zero():
    tau = planar.tau_of(MultiplierField.from_entries({}, 2), np.zeros(2))
    np.testing.assert_allclose(tau(TH), 0.0, atol=1e-14)


def test_tau_of_closed_form_norm():
    # F = r + 0.1 (y1^2 - y2^2)/r = r (1 + 0.1 cos 2t), so tau = 1 - 0.3 cos 2t
    F = ScalarField.from_text("sqrt(y1^2+y2^2) + 0.1*(y1^2 - y2^2)/sqrt(y1^2+y2^2)", 2)
    tau = planar.tau_of(fibre_hessian(F), np.zeros(2))
    np.testing.assert_allclose(tau(TH), 1.0 - 0.3 * np.cos(2 * TH), atol=1e-9)


def test_tau_of_rejects_wrong_degree():
    h = MultiplierField.from_text({(0, 0): "y2^2", (0, 1): "-y1*y2", (1, 1): "y1^2"}, 2, "degree 0")
    with pytest.raises(TauError):
        planar.tau_of(h, np.zeros(2))


def test_tau_of_rejects_spatial_multiplier():
    with pytest.raises(ValueError):
        planar.tau_of(catalog.get("euclid_norm3").multiplier, np.zeros(3))


@pytest.mark.parametrize("text, I_s, I_c", [
    ("1", 0.0, 0.0),
    ("cos(t)", 0.0, np.pi),
    ("sin(t)", np.pi, 0.0),
    ("3*sin(t) - cos(t) + cos(2*t)", 3 * np.pi, -np.pi),
    ("cos(t)^2", 0.0, 0.0),
])
def test_exactness_integrals(text, I_s, I_c):
    a, b = planar.exactness_integrals(profile(text))
    assert a == pytest.approx(I_s, abs=1e-10)
    assert b == pytest.approx(I_c, abs=1e-10)


def test_solve_phi_constant():
    sol = planar.solve_phi(profile("1"))
    assert sol.periodic
    np.testing.assert_allclose(sol.phi_at(TH), 1.0, atol=1e-10)
    assert sol.residual < 1e-8


def test_solve_phi_second_harmonic():
    sol = planar.solve_phi(profile("1 + 0.5*cos(2*t)"))
    assert sol.periodic
    np.testing.assert_allclose(sol.phi_at(TH), 1.0 - np.cos(2 * TH) / 6.0, atol=1e-8)


def test_solve_phi_obstructed_cosine():
    sol = planar.solve_phi(profile("cos(t)"))
    assert not sol.periodic
    assert sol.k1 == pytest.approx(1.0, abs=1e-10)
    assert sol.k2 == pytest.approx(0.0, abs=1e-10)
    A, B = sol.secular
    assert A == pytest.approx(0.0, abs=1e-10)
    assert B == pytest.approx(0.5, abs=1e-10)
    # phi = t sin(t) / 2 up to homogeneous terms, which are absent here
    np.testing.assert_allclose(sol.phi_at(TH), 0.5 * TH * np.sin(TH), atol=1e-8)
    with pytest.raises(ValueError):
        sol.profile


def test_solve_phi_satisfies_ode_by_fd():
    sol = planar.solve_phi(profile("1 + 0.3*sin(3*t) - 0.2*cos(4*t)"))
    t = np.linspace(0.1, 6.0, 40)
    h = 1e-4
    d2 = (sol.phi_at(t + h) - 2 * sol.phi_at(t) + sol.phi_at(t - h)) / h**2
    tau = 1 + 0.3 * np.sin(3 * t) - 0.2 * np.cos(4 * t)
    np.testing.assert_allclose(d2 + sol.phi_at(t), tau, atol=1e-6)


def test_obstruction_split_example():
    k1, k2, rest = planar.obstruction_split(profile("2*sin(t) + 1"))
    assert k1 == pytest.approx(0.0, abs=1e-10)
    assert k2 == pytest.approx(2.0, abs=1e-10)
    np.testing.assert_allclose(rest(TH), 1.0, atol=1e-10)
    assert planar.solve_phi(rest).periodic


def test_obstruction_split_taylor_consistent():
    _, _, rest = planar.obstruction_split(profile("cos(t) + sin(2*t)"))
    d = rest.taylor(np.array([0.4]), 2)
    np.testing.assert_allclose(d[1], 2 * np.cos(0.8), atol=1e-10)
    np.testing.assert_allclose(d[2], -2 * np.sin(0.8), atol=1e-10)


@pytest.mark.parametrize("text", ["cos(t)", "sin(t)", "2*cos(t) - 0.5*sin(t)"])
def test_first_harmonic_phi_gives_zero_multiplier(text):
    h = planar.hessian_from_phi(text)
    y = np.array([np.cos(TH), np.sin(TH)]) * 1.7
    np.testing.assert_allclose(h.values(np.zeros_like(y), y), 0.0, atol=1e-12)


def test_hessian_from_phi_matches_fibre_hessian():
    h = planar.hessian_from_phi("1 + 0.1*cos(2*t)")
    F = ScalarField.from_text("sqrt(y1^2+y2^2) + 0.1*(y1^2 - y2^2)/sqrt(y1^2+y2^2)", 2)
    rng = np.random.default_rng(0)
    y = rng.normal(size=(2, 20))
    x = np.zeros_like(y)
    np.testing.assert_allclose(h.values(x, y), fibre_hessian(F).values(x, y), atol=1e-10)
    a = h.jets(x, y, 2)
    b = fibre_hessian(F).jets(x, y, 2)
    np.testing.assert_allclose(a[0][1].partial(2, 3), b[0][1].partial(2, 3), atol=1e-8)


def test_hessian_from_periodic_solution():
    sol = planar.solve_phi(profile("1 - 0.4*sin(2*t)"))
    back = planar.tau_of(planar.hessian_from_phi(sol), np.zeros(2))
    np.testing.assert_allclose(back(TH), 1 - 0.4 * np.sin(2 * TH), atol=1e-8)


def test_non_periodic_profile_rejected():
    with pytest.raises(TauError):
        profile("t")


def test_profile_variable_restricted():
    with pytest.raises(exprlang.ParseError):
        profile("x1 + t")


def test_from_samples_resolves_band_limited_profile():
    N = 64
    t = 2 * np.pi * np.arange(N) / N
    p = PlanarProfile.from_samples(1 + 0.2 * np.cos(3 * t) - 0.1 * np.sin(t))
    u = np.linspace(0.05, 6.2, 50)
    np.testing.assert_allclose(p(u), 1 + 0.2 * np.cos(3 * u) - 0.1 * np.sin(u), atol=1e-12)
    np.testing.assert_allclose(p.derivative(u), -0.6 * np.sin(3 * u) - 0.1 * np.cos(u), atol=1e-11)


def test_from_samples_too_few():
    with pytest.raises(TauError):
        PlanarProfile.from_samples([1.0, 2.0])


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=4, max_size=4), st.floats(0.5, 2.0))
def test_round_trip_property(c, a0):
    text = f"{a0} + ({c[0]})*cos(2*t) + ({c[1]})*sin(2*t) + ({c[2]})*cos(3*t) + ({c[3]})*sin(5*t)"
    tau = profile(text)
    sol = planar.solve_phi(tau)
    assert sol.periodic
    back = planar.tau_of(planar.hessian_from_phi(sol), np.zeros(2))
    np.testing.assert_allclose(back(TH), tau(TH), atol=1e-7)


# propagation ---------------------------------------------------------------


def unit_fibres(k):
    a = np.linspace(0.0, 2 * np.pi, k, endpoint=False) + 0.3
    return np.stack([np.cos(a), np.sin(a)], axis=1)


def test_propagate_flat_euclidean():
    ys = unit_fibres(4)
    xs = np.zeros((4, 2))
    res = planar.propagate_multiplier(SprayField.flat(2), planar.euclidean_section(xs, ys), T=2.0)
    assert res.report.passed
    assert planar.multiplier_residual_along(res, catalog.get("euclid_norm2").multiplier) < 1e-8


def test_propagate_shen_circle():
    shen = catalog.get("shen_circle")
    ys = unit_fibres(3)
    xs = np.array([[0.1, 0.2], [-0.3, 0.0], [0.5, 0.5]])
    res = planar.propagate_multiplier(shen.spray, planar.euclidean_section(xs, ys), T=2 * np.pi)
    assert res.report.passed
    assert planar.multiplier_residual_along(res, shen.multiplier) < 1e-7
    # unit circles close after one turn
    for p in res.trajectories:
        np.testing.assert_allclose(p.x[:, -1], p.x[:, 0], atol=1e-7)


def test_propagate_samples_shapes():
    res = planar.propagate_multiplier(SprayField.flat(2), planar.euclidean_section(np.zeros((2, 2)), unit_fibres(2)),
                                      T=1.0, samples=11)
    x, y, h = res.samples()
    assert x.shape == (2, 22) and y.shape == (2, 22) and h.shape == (2, 2, 22)


def test_propagate_rejects_eta():
    sp = SectionPoint(np.zeros(2), np.array([1.0, 0.0]), np.eye(2))
    with pytest.raises(ConstraintError, match="h y = 0"):
        planar.propagate_multiplier(SprayField.flat(2), [sp])


def test_propagate_rejects_lambda():
    y = np.array([0.0, 1.0])
    h = np.eye(2) - np.outer(y, y)
    sp = SectionPoint(np.zeros(2), y, h, radial=np.zeros((2, 2)))
    with pytest.raises(ConstraintError, match="Delta"):
        planar.propagate_multiplier(SprayField.flat(2), [sp])


@pytest.mark.parametrize("bad", [
    SectionPoint(np.zeros(2), np.array([2.0, 0.0]), np.diag([0.0, 1.0])),
    SectionPoint(np.zeros(2), np.array([1.0, 0.0]), np.array([[0.0, 0.0], [0.5, 1.0]])),
])
def test_propagate_rejects_bad_section(bad):
    with pytest.raises(ConstraintError):
        planar.propagate_multiplier(SprayField.flat(2), [bad])


def test_propagate_region_exit():
    sec = planar.euclidean_section(np.zeros((1, 2)), unit_fibres(1))
    with pytest.raises(RegionError):
        planar.propagate_multiplier(SprayField.flat(2), sec, T=5.0, region=1.0)
    res = planar.propagate_multiplier(SprayField.flat(2), sec, T=5.0, region=1.0, truncate=True)
    assert res.report.flags["left_region"]
    assert res.trajectories[0].t[-1] < 1.01


def test_propagate_rejects_spatial_spray():
    with pytest.raises(ValueError):
        planar.propagate_multiplier(SprayField.flat(3), [])
