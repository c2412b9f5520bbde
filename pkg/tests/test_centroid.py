import json
from pathlib import Path

import numpy as np
import pytest

from ellobst.bodies import EllipsoidBody, PolytopeBody, SuperellipsoidBody, body_from_description
from ellobst.centroid import gravity_residual, t_epsilon, weighted_centroid
from ellobst.errors import ValidationError
from ellobst.geometry import Ellipsoid
from ellobst.potential import body_potential, kernel_constant
from oracles import UNIT_SIMPLEX, simplex_field

ORACLE = json.loads((Path(__file__).parent / "data" / "simplex_centroid_oracle.json").read_text())
SIMPLEX = PolytopeBody.simplex(UNIT_SIMPLEX)


def test_t_epsilon_fixed_at_center():
    body = EllipsoidBody(Ellipsoid((1.5, 1.0, 0.5)))
    np.testing.assert_allclose(t_epsilon(body, [0, 0, 0], 0.3), 0.0, atol=1e-13)


def test_t_epsilon_rejects_bad_eps():
    with pytest.raises(ValidationError):
        t_epsilon(SIMPLEX, [0.2, 0.2, 0.2], 1.5)


def test_t_epsilon_simplex_refinement():
    # resolution doubling as the oracle
    x = np.full(3, 0.25)
    coarse = t_epsilon(SIMPLEX, x, 0.25, 24)
    fine = t_epsilon(SIMPLEX, x, 0.25, 48)
    assert np.max(np.abs(coarse - fine)) < 1e-6


@pytest.mark.parametrize("body", [SIMPLEX, PolytopeBody.box([0, 0, 0], [2, 1, 1]),
                                  SuperellipsoidBody([1, 0.5, 0.7], 3.0, [1, 1, 0])], ids=str)
def test_self_map_bound(body):
    rng = np.random.default_rng(11)
    R = body.bounding_radius
    for _ in range(30):
        d = rng.standard_normal(3)
        x = body.center + d / np.linalg.norm(d) * R * rng.uniform(0, 1) ** (1 / 3)
        y = t_epsilon(body, x, rng.uniform(0.01, 0.99), 12)
        assert np.linalg.norm(y - body.center) <= R * (1 + 1e-12)


def test_gravity_residual_ball():
    ball = EllipsoidBody(Ellipsoid((1.0, 1.0, 1.0)))
    F, _ = gravity_residual(ball, [0, 0, 0])
    assert np.linalg.norm(F) < 1e-10
    # inside a ball F(x) = -(4 pi / 3) x; points toward the centre
    F, err = gravity_residual(ball, [0.3, 0, 0], 32)
    assert F[0] < 0
    assert F[0] == pytest.approx(-4 * np.pi / 3 * 0.3, abs=1e-8)


def test_gravity_residual_antisymmetric():
    box = PolytopeBody.box([-1, -1, -1], [1, 1, 1])
    a, _ = gravity_residual(box, [0.2, -0.1, 0.3])
    b, _ = gravity_residual(box, [-0.2, 0.1, -0.3])
    np.testing.assert_allclose(a, -b, atol=1e-10)


def test_gravity_residual_matches_face_integrals():
    x = [0.3, 0.2, 0.1]
    F, _ = gravity_residual(SIMPLEX, x, 32)
    np.testing.assert_allclose(F, simplex_field(x), atol=1e-6)


@pytest.mark.parametrize("desc,center", [
    ({"kind": "box", "lower": [0, 0, 0], "upper": [1, 1, 1]}, [0.5, 0.5, 0.5]),
    ({"kind": "ellipsoid", "axes": [1, 2, 0.5], "center": [1, 2, 3]}, [1, 2, 3]),
    ({"kind": "superellipsoid", "axes": [1, 0.6, 0.8], "exponent": 4, "center": [-1, 0, 2]}, [-1, 0, 2]),
], ids=["cube", "ellipsoid", "superellipsoid"])
def test_symmetric_bodies(desc, center):
    body = body_from_description(desc)
    start = body.center + 0.4 * (body.boundary_points(4)[3] - body.center)
    assert np.linalg.norm(start - center) > 0.05
    res = weighted_centroid(body, tol=1e-8, start=start)
    np.testing.assert_allclose(res.x0, center, atol=1e-8)
    assert res.residual <= 1e-8


def test_simplex_matches_oracle():
    res = weighted_centroid(SIMPLEX, tol=1e-8)
    assert np.max(np.abs(res.x0 - ORACLE["x0"])) < 1e-5
    assert SIMPLEX.contains(res.x0)


def test_centroid_zero_of_potential_gradient():
    res = weighted_centroid(SIMPLEX, tol=1e-8)
    step = 1e-4
    grad = [(body_potential(SIMPLEX, res.x0 + step * e, 24) - body_potential(SIMPLEX, res.x0 - step * e, 24))
            / (2 * step) for e in np.eye(3)]
    assert np.linalg.norm(grad) < 1e-5
    off = res.x0 + np.array([0.05, 0.0, 0.0])
    grad_off = (body_potential(SIMPLEX, off + step * np.eye(3)[0], 24)
                - body_potential(SIMPLEX, off - step * np.eye(3)[0], 24)) / (2 * step)
    assert abs(grad_off) > 1e-3
    assert kernel_constant(3) > 0


def test_trace_and_serialisation():
    res = weighted_centroid(PolytopeBody.box([0, 0, 0], [2, 1, 1]), tol=1e-8)
    eps = [e for e, _ in res.epsilon_trace]
    assert eps[0] == 0.5 and all(b == a / 2 for a, b in zip(eps, eps[1:]))
    doc = res.to_dict()
    assert json.loads(json.dumps(doc))["x0"] == pytest.approx(list(res.x0))
    assert len(doc["epsilon_trace"]) == len(eps)


def test_asymmetric_start_converges():
    res = weighted_centroid(SIMPLEX, tol=1e-8, start=[0.05, 0.05, 0.8])
    assert np.max(np.abs(res.x0 - ORACLE["x0"])) < 1e-5
