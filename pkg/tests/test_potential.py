import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ellobst.bodies import EllipsoidBody, PolytopeBody
from ellobst.errors import QuadratureError, ValidationError
from ellobst.geometry import Ellipsoid, unit_ball_volume
from ellobst.potential import (PotentialNormalization, body_field, body_potential, body_potential_estimate,
                               conductor_potential, ellipsoid_potential, ellipsoid_potential_gradient,
                               ellipsoidal_coordinate, kappa_coefficients, kernel_constant)
from oracles import ball_potential, prolate_kappa

axes3 = st.tuples(*[st.floats(0.2, 5.0)] * 3)
axes4 = st.tuples(*[st.floats(0.2, 5.0)] * 4)


def test_kernel_constant_n3():
    assert kernel_constant(3) == pytest.approx(1 / (4 * np.pi))


def test_dimension_two_rejected():
    with pytest.raises(ValidationError):
        PotentialNormalization(2)
    with pytest.raises(ValidationError):
        kappa_coefficients((1.0, 1.0))


def test_kappa_ball():
    np.testing.assert_allclose(kappa_coefficients((1, 1, 1)), [1 / 6] * 3, atol=1e-14)
    np.testing.assert_allclose(kappa_coefficients((1, 1, 1, 1)), [1 / 8] * 4, atol=1e-14)


def test_kappa_prolate_closed_form():
    np.testing.assert_allclose(kappa_coefficients((2, 1, 1)), prolate_kappa(2.0), atol=1e-10)


def test_kappa_rejects_bad_axes():
    with pytest.raises(ValidationError):
        kappa_coefficients((1.0, 0.0, 1.0))


@settings(max_examples=40, deadline=None)
@given(st.one_of(axes3, axes4))
def test_trace_identity(axes):
    assert abs(kappa_coefficients(axes).sum() - 0.5) <= 1e-10


@settings(max_examples=20, deadline=None)
@given(axes3, st.sampled_from([0.1, 10.0]))
def test_kappa_scale_invariant(axes, lam):
    np.testing.assert_allclose(kappa_coefficients(np.array(axes) * lam), kappa_coefficients(axes), atol=1e-10)


def test_kappa_ordering_inverse_to_axes():
    k = kappa_coefficients((3.0, 1.5, 0.5))
    assert k[0] < k[1] < k[2]


def test_ellipsoidal_coordinate_examples():
    assert ellipsoidal_coordinate((1, 1, 1), [2, 0, 0]) == pytest.approx(3.0, abs=1e-12)
    assert ellipsoidal_coordinate((2, 1, 1), [0, 2, 0]) == pytest.approx(3.0, abs=1e-12)
    assert ellipsoidal_coordinate((2, 1, 1), [0.5, 0.1, 0.2]) == 0.0


def test_ellipsoidal_coordinate_solves_equation():
    a = np.array([1.7, 0.9, 0.4])
    x = np.random.default_rng(1).uniform(-4, 4, (200, 3))
    lam = ellipsoidal_coordinate(a, x)
    ext = np.sum(x**2 / a**2, axis=1) > 1
    resid = np.sum(x[ext] ** 2 / (a**2 + lam[ext, None]), axis=1) - 1
    assert np.max(np.abs(resid)) < 1e-12


def test_ball_potential_values():
    assert ellipsoid_potential((1, 1, 1), [0, 0, 0]) == pytest.approx(0.5, abs=1e-12)
    assert ellipsoid_potential((1, 1, 1), [2, 0, 0]) == pytest.approx(1 / 6, abs=1e-12)
    # four dimensions: interior 1/4 - |x|^2/8, exterior |x|^-2/8
    assert ellipsoid_potential((1, 1, 1, 1), [0, 0, 0, 0]) == pytest.approx(0.25, abs=1e-12)
    assert ellipsoid_potential((1, 1, 1, 1), [2, 0, 0, 0]) == pytest.approx(1 / 32, abs=1e-12)


def test_branches_agree_on_boundary():
    a = (2.0, 1.0, 1.0)
    k = kappa_coefficients(a)
    interior = ellipsoid_potential(a, [0, 0, 0]) - 4.0 * k[0]
    exterior = ellipsoid_potential(a, [2.0 * (1 + 1e-13), 0, 0])
    assert exterior == pytest.approx(interior, abs=1e-10)


@settings(max_examples=10, deadline=None)
@given(axes3)
def test_interior_quadratic_law(axes):
    a = np.array(axes)
    rng = np.random.default_rng(0)
    g = rng.standard_normal((50, 3))
    x = g / np.linalg.norm(g, axis=1, keepdims=True) * a * rng.uniform(0, 1, (50, 1))
    k = kappa_coefficients(a)
    dev = ellipsoid_potential(a, x) - ellipsoid_potential(a, np.zeros(3)) + x**2 @ k
    assert np.max(np.abs(dev)) < 1e-9


def test_carlson_matches_quadrature():
    a = (1.7, 1.0, 0.6)
    x = np.random.default_rng(3).uniform(-3, 3, (300, 3))
    np.testing.assert_allclose(ellipsoid_potential(a, x, "carlson"), ellipsoid_potential(a, x), atol=1e-12)
    np.testing.assert_allclose(ellipsoid_potential_gradient(a, x, "carlson"),
                               ellipsoid_potential_gradient(a, x), atol=1e-12)
    with pytest.raises(ValidationError):
        ellipsoid_potential((1, 1, 1, 1), [0, 0, 0, 0], "carlson")


def test_gradient_examples():
    np.testing.assert_allclose(ellipsoid_potential_gradient((2, 1, 1), [0, 0, 0]), 0.0, atol=1e-15)
    np.testing.assert_allclose(ellipsoid_potential_gradient((1, 1, 1), [2, 0, 0]), [-1 / 12, 0, 0], atol=1e-12)


def test_gradient_matches_finite_differences():
    a = (2, 1, 1)
    x = np.array([3.0, 1.0, 1.0])
    step = 1e-4
    fd = [(ellipsoid_potential(a, x + step * e) - ellipsoid_potential(a, x - step * e)) / (2 * step)
          for e in np.eye(3)]
    np.testing.assert_allclose(ellipsoid_potential_gradient(a, x), fd, atol=1e-6)


def _laplacian(f, x, step):
    n = len(x)
    return sum((f(x + step * e) - 2 * f(x) + f(x - step * e)) / step**2 for e in np.eye(n))


def test_laplacian_inside_is_minus_one():
    a = (1.5, 1.0, 0.7)
    lap = _laplacian(lambda p: ellipsoid_potential(a, p), np.array([0.2, 0.1, -0.2]), 1e-2)
    assert lap == pytest.approx(-1.0, abs=1e-6)


def test_harmonic_outside_second_order():
    a = (1.5, 1.0, 0.7)
    x = np.array([1.8, 0.9, 0.5])
    errs = [abs(_laplacian(lambda p: ellipsoid_potential(a, p), x, s)) for s in (0.08, 0.04, 0.02)]
    assert errs[2] < 1e-3
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.8)


def test_far_field_decay():
    a = np.array([1.5, 1.0, 0.7])
    target = kernel_constant(3) * unit_ball_volume(3) * np.prod(a)
    d = np.array([1.0, 2.0, 2.0]) / 3.0
    devs = [abs(ellipsoid_potential(a, R * d) * R - target) for R in (10, 20, 40)]
    assert devs[0] > devs[1] > devs[2]
    assert devs[2] < 1e-3 * target


def test_body_potential_ball():
    body = EllipsoidBody(Ellipsoid((1.0, 1.0, 1.0)))
    assert body_potential(body, [2.0, 0.0, 0.0], 32) == pytest.approx(1 / 6, abs=1e-10)
    assert body_potential(body, [0.3, 0.2, 0.0], 24) == pytest.approx(float(ball_potential([0.3, 0.2, 0])[0]),
                                                                       abs=1e-12)


def test_body_potential_matches_ellipsoid_closed_form():
    a = (2.0, 1.0, 1.0)
    body = EllipsoidBody(Ellipsoid(a))
    for x in ([2.5, 0.5, 0.3], [0.0, 1.8, 0.0], [1.0, 0.3, 0.2]):
        assert body_potential(body, x, 48) == pytest.approx(ellipsoid_potential(a, x), abs=1e-6)


def test_body_potential_translation_invariant():
    body = PolytopeBody.box([-0.5, -0.4, -0.3], [0.5, 0.4, 0.3])
    t = np.array([1.0, -2.0, 0.5])
    for x in ([0.1, 0.1, 0.0], [1.2, 0.0, 0.3]):
        v0 = body_potential(body, x, 16)
        v1 = body_potential(body.translated(t), np.array(x) + t, 16)
        assert v1 == pytest.approx(v0, abs=1e-10)


def test_body_potential_error_reported():
    body = PolytopeBody.box([0, 0, 0], [1, 1, 1])
    value, err = body_potential_estimate(body, [1.05, 0.5, 0.5], 4)
    assert err > 0
    with pytest.raises(QuadratureError):
        body_potential(body, [1.05, 0.5, 0.5], 4, tol=1e-14)


def test_body_field_is_potential_gradient():
    body = PolytopeBody.simplex([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])
    x = np.array([0.2, 0.3, 0.1])
    step = 1e-4
    fd = np.array([(body_potential(body, x + step * e, 24) - body_potential(body, x - step * e, 24)) / (2 * step)
                   for e in np.eye(3)])
    np.testing.assert_allclose(kernel_constant(3) * body_field(body, x, 24), fd, atol=1e-6)


def test_conductor_potential_constant_inside_and_harmonic():
    a = (1.5, 1.0, 0.7)
    inside = conductor_potential(a, np.array([[0.0, 0.0, 0.0], [0.5, 0.2, 0.1]]))
    assert inside[0] == pytest.approx(inside[1], abs=1e-13)
    x = np.array([2.0, 1.0, 0.5])
    assert abs(_laplacian(lambda p: conductor_potential(a, p[None, :])[0], x, 0.01)) < 1e-4
