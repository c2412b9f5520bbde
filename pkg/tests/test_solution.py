import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ellobst.errors import ValidationError
from ellobst.geometry import QuadraticBlowdown, quadric_value, scale
from ellobst.potential import kappa_coefficients
from ellobst.solution import (EllipsoidSolution, RescaledSolution, axes_from_blowdown, blowdown_limit_check,
                              evaluate, evaluate_rescaled)
from conftest import unit_directions
from oracles import ball_solution

weights = st.tuples(*[st.floats(0.15, 1.0)] * 3)


def test_ball_axes():
    np.testing.assert_allclose(axes_from_blowdown(QuadraticBlowdown((1 / 6,) * 3)), 1.0, atol=1e-12)


def test_spheroid_roundtrip():
    target = np.array([2.0, 1.0, 1.0]) / 2 ** (1 / 3)
    Q = QuadraticBlowdown.normalized(kappa_coefficients(target))
    np.testing.assert_allclose(axes_from_blowdown(Q), target, atol=1e-8)


def test_axes_ordering_inverse_to_q():
    a = axes_from_blowdown(QuadraticBlowdown((0.3, 0.1, 0.1)))
    assert a[0] < a[1]
    assert a[1] == pytest.approx(a[2], abs=1e-12)
    assert np.prod(a) == pytest.approx(1.0, abs=1e-12)
    assert np.max(np.abs(kappa_coefficients(a) - [0.3, 0.1, 0.1])) < 1e-9


def test_four_dimensional():
    Q = QuadraticBlowdown((0.2, 0.15, 0.1, 0.05))
    sol = EllipsoidSolution.from_blowdown(Q)
    assert sol.kappa_residual() < 1e-9
    assert sol([0.0, 0.0, 0.0, 0.0]) == 0.0


@settings(max_examples=15, deadline=None)
@given(weights)
def test_roundtrip_property(w):
    q = 0.5 * np.array(w) / np.sum(w)
    a = axes_from_blowdown(QuadraticBlowdown.normalized(q))
    assert np.max(np.abs(kappa_coefficients(a) - q)) < 1e-9
    assert np.all(np.argsort(a) == np.argsort(-q)) or len(set(np.round(q, 12))) < 3


def test_invalid_q():
    with pytest.raises(ValidationError):
        axes_from_blowdown((0.2, 0.2, 0.2))


def test_eval_examples(ball):
    assert ball([2.0, 0.0, 0.0]) == pytest.approx(1 / 3, abs=1e-12)
    assert ball([0.0, 0.0, 0.0]) == 0.0
    x = np.random.default_rng(0).uniform(-3, 3, (500, 3))
    np.testing.assert_allclose(ball(x), ball_solution(x), atol=1e-11)


def test_zero_on_e_positive_outside(spheroid):
    E = spheroid.ellipsoid
    d = unit_directions(10000, seed=1)
    inside = d * E.axes * np.random.default_rng(2).uniform(0, 1, (10000, 1))
    assert np.all(spheroid(inside) == 0.0)
    outside = d * E.axes * np.random.default_rng(3).uniform(1.001, 3, (10000, 1))
    assert np.min(spheroid(outside)) > 0.0


def test_defining_identity(spheroid):
    d = unit_directions(100, seed=4)
    x = d * spheroid.ellipsoid.axes * np.random.default_rng(5).uniform(0, 1, (100, 1))
    dev = spheroid.Q(x) - spheroid.np_at_origin + spheroid.potential(x)
    assert np.max(np.abs(dev)) < 1e-9


def test_discrete_laplacian(spheroid):
    # second order away from the free boundary, bounded near it
    x = np.array([[2.0, 0.5, 0.3], [0.5, 1.4, 0.2], [0.0, 0.0, 1.2]])

    def lap(s):
        return sum((spheroid(x + s * e) - 2 * spheroid(x) + spheroid(x - s * e)) / s**2 for e in np.eye(3))

    errs = np.array([np.max(np.abs(lap(s) - 1.0)) for s in (0.04, 0.02, 0.01)])
    assert errs[-1] < 1e-4
    assert np.all(np.log2(errs[:-1] / errs[1:]) > 1.8)
    inner = np.array([[0.3, 0.1, 0.1]])
    lap_in = sum((spheroid(inner + 0.01 * e) - 2 * spheroid(inner) + spheroid(inner - 0.01 * e)) / 1e-4
                 for e in np.eye(3))
    assert lap_in[0] == 0.0


def test_gradient_zero_inside_and_continuous(spheroid):
    assert np.all(spheroid.gradient(np.array([[0.1, 0.1, 0.1]])) == 0.0)
    a = spheroid.ellipsoid.axes
    g = spheroid.gradient(np.array([[a[0] * 1.0001, 0, 0]]))
    assert np.linalg.norm(g) < 1e-3


def test_rescaled_examples(ball, spheroid):
    x = np.random.default_rng(6).uniform(-2, 2, (50, 3))
    np.testing.assert_array_equal(evaluate_rescaled(RescaledSolution(spheroid, 1.0), x), evaluate(spheroid, x))
    assert RescaledSolution(ball, 2.0)([1.0, 0.0, 0.0]) == pytest.approx(1 / 12, abs=1e-12)
    x = np.array([2.0, 0.0, 0.0])
    assert RescaledSolution(ball, 2.0)(x) >= RescaledSolution(ball, 1.0)(x)
    with pytest.raises(ValidationError):
        RescaledSolution(ball, 0.0)


def test_rescaled_coincidence_set(spheroid):
    r = 1.7
    rs = RescaledSolution(spheroid, r)
    Er = scale(spheroid.ellipsoid, r)
    x = np.random.default_rng(7).uniform(-1.2, 1.2, (10000, 3))
    q = quadric_value(Er, x)
    away = np.abs(q - 1) > 1e-9
    assert np.array_equal((rs(x) == 0.0)[away], (q <= 1.0)[away])


def test_rescaled_keeps_blowdown(spheroid):
    rs = RescaledSolution(spheroid, 2.5)
    d = unit_directions(20, seed=8)
    R = 200.0
    assert np.max(np.abs(rs(R * d) / R**2 - spheroid.Q(d))) < 1e-4


def test_blowdown_ball_tail(ball):
    radii = [10.0, 20.0, 40.0]
    rep = blowdown_limit_check(ball, radii)
    exact = [abs(1 / (3 * r**3) - 1 / (2 * r * r)) for r in radii]
    np.testing.assert_allclose(rep.errors, exact, rtol=1e-8)
    assert rep.decreasing
    assert rep.constant <= 1.0


def test_blowdown_spheroid(spheroid):
    rep = blowdown_limit_check(spheroid, [10.0, 40.0])
    assert rep.errors[1] < rep.errors[0]


def test_blowdown_axis_directions_exact(spheroid):
    # on axis directions the quadratic part is q_i exactly
    e = np.eye(3)
    np.testing.assert_allclose(spheroid.Q(e), spheroid.Q.q, atol=0)


def test_blowdown_radii_must_increase(ball):
    with pytest.raises(ValidationError):
        blowdown_limit_check(ball, [20.0, 10.0])


def test_json_roundtrip(spheroid):
    again = EllipsoidSolution.from_json(spheroid.to_json())
    assert again == spheroid
    with pytest.raises(ValidationError):
        EllipsoidSolution.from_dict({"schema": "other"})
