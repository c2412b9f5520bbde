"""Exact global solutions with ellipsoidal coincidence sets.

Given a blow-down ``p(x) = x^T Q x`` the ellipsoid ``E`` is the one whose
interior potential has quadratic part ``-p``; then

    u_E(x) = p(x) - NP_E(0) + NP_E(x)

vanishes on ``E``, has Laplacian one outside and grows like ``p`` at infinity.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .bodies import sphere_rule
from .errors import ConvergenceError, ValidationError
from .geometry import Ellipsoid, QuadraticBlowdown, scale
from .potential import ellipsoid_potential, ellipsoid_potential_gradient, kappa_coefficients

SCHEMA = "ellobst.solution/1"
ZERO_CLAMP = 1e-12
FD_STEP = 1e-6
MAX_NEWTON = 60


def axes_from_blowdown(Q: QuadraticBlowdown, tol: float = 1e-14) -> np.ndarray:
    """Semi-axes (normalised to unit product) of the ellipsoid realising ``Q``.

    Damped Newton in ``theta = log(a)`` with ``sum(theta) = 0``, starting from
    the ball.  The Jacobian is a central finite difference with step 1e-6.
    """
    if not isinstance(Q, QuadraticBlowdown):
        Q = QuadraticBlowdown(tuple(Q))
    n = Q.dim
    if n < 3:
        raise ValidationError("ellipsoid solutions need n >= 3")
    q = Q.q

    def axes_of(free):
        theta = np.append(free, -np.sum(free))
        return np.exp(theta)

    def residual(free):
        return kappa_coefficients(axes_of(free))[:-1] - q[:-1]

    free = np.zeros(n - 1)
    r = residual(free)
    for _ in range(MAX_NEWTON):
        if np.max(np.abs(r)) <= tol:
            return axes_of(free)
        J = np.empty((n - 1, n - 1))
        for j in range(n - 1):
            e = np.zeros(n - 1)
            e[j] = FD_STEP
            J[:, j] = (residual(free + e) - residual(free - e)) / (2 * FD_STEP)
        step = np.linalg.solve(J, -r)
        gamma = 1.0
        norm0 = np.max(np.abs(r))
        while gamma > 1e-6:
            trial = free + gamma * step
            rt = residual(trial)
            if np.max(np.abs(rt)) < norm0:
                break
            gamma *= 0.5
        else:
            # No decrease possible: accept if we are at the quadrature floor.
            if norm0 <= 1e-11:
                return axes_of(free)
            raise ConvergenceError(f"Newton stalled with kappa residual {norm0:.3g}", last=axes_of(free))
        free, r = trial, rt
    if np.max(np.abs(r)) <= 1e-11:
        return axes_of(free)
    raise ConvergenceError(f"no convergence after {MAX_NEWTON} iterations", last=axes_of(free))


@dataclass(frozen=True)
class EllipsoidSolution:
    """``u_E`` for a given blow-down; immutable after construction."""

    axes: tuple
    Q: QuadraticBlowdown
    np_at_origin: float
    method: str = "quadrature"
    kappa: tuple = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "axes", tuple(float(a) for a in self.axes))
        if self.kappa is None:
            object.__setattr__(self, "kappa", tuple(kappa_coefficients(self.axes)))

    @classmethod
    def from_blowdown(cls, Q: QuadraticBlowdown, method: str = "quadrature") -> "EllipsoidSolution":
        axes = axes_from_blowdown(Q)
        return cls(tuple(axes), Q, float(ellipsoid_potential(axes, np.zeros(len(axes)), method)), method)

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def ellipsoid(self) -> Ellipsoid:
        return Ellipsoid(self.axes)

    def kappa_residual(self) -> float:
        return float(np.max(np.abs(np.asarray(self.kappa) - self.Q.q)))

    def potential(self, x):
        return ellipsoid_potential(self.axes, x, self.method)

    def __call__(self, x):
        return evaluate(self, x)

    def gradient(self, x):
        pts = np.asarray(x, dtype=float)
        g = self.Q.gradient(pts) + ellipsoid_potential_gradient(self.axes, pts, self.method)
        inside = np.sum(pts**2 / np.asarray(self.axes) ** 2, axis=-1) <= 1.0
        return np.where(np.asarray(inside)[..., None], 0.0, g)

    def to_dict(self) -> dict:
        return {"schema": SCHEMA, "axes": list(self.axes), "q": list(self.Q.diag),
                "np_at_origin": self.np_at_origin, "method": self.method}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "EllipsoidSolution":
        if doc.get("schema") != SCHEMA:
            raise ValidationError(f"not a solution document (schema {doc.get('schema')!r})")
        return cls(tuple(doc["axes"]), QuadraticBlowdown(tuple(doc["q"])), float(doc["np_at_origin"]),
                   doc.get("method", "quadrature"))

    @classmethod
    def from_json(cls, text: str) -> "EllipsoidSolution":
        return cls.from_dict(json.loads(text))


def evaluate(sol: EllipsoidSolution, x):
    """``u_E(x)``: exactly zero on ``E``, positive outside."""
    pts = np.asarray(x, dtype=float)
    u = sol.Q(pts) - sol.np_at_origin + sol.potential(pts)
    inside = np.sum(pts**2 / np.asarray(sol.axes) ** 2, axis=-1) <= 1.0
    u = np.where(inside | (np.abs(u) < ZERO_CLAMP), 0.0, u)
    return float(u) if u.ndim == 0 else u


@dataclass(frozen=True)
class RescaledSolution:
    """``U_r(x) = u_E(r x) / r^2``, whose coincidence set is ``E / r``."""

    base: EllipsoidSolution
    r: float

    def __post_init__(self):
        if not self.r > 0:
            raise ValidationError(f"r must be positive, got {self.r}")

    @property
    def ellipsoid(self) -> Ellipsoid:
        return scale(self.base.ellipsoid, self.r)

    @property
    def dim(self) -> int:
        return self.base.dim

    def __call__(self, x):
        return evaluate_rescaled(self, x)

    def gradient(self, x):
        return self.base.gradient(self.r * np.asarray(x, dtype=float)) / self.r


def evaluate_rescaled(rs: RescaledSolution, x):
    return evaluate(rs.base, rs.r * np.asarray(x, dtype=float)) / rs.r**2


@dataclass
class BlowdownReport:
    radii: list
    errors: list
    decreasing: bool
    constant: float  # error * r at the largest radius


def blowdown_limit_check(sol: EllipsoidSolution, radii, resolution: int = 8) -> BlowdownReport:
    """Sup over unit directions of ``|u_E(r theta)/r^2 - theta^T Q theta|``."""
    radii = [float(r) for r in radii]
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValidationError("radii must be increasing")
    dirs, _ = sphere_rule(sol.dim, resolution)
    dirs = np.vstack([dirs, np.eye(sol.dim)])
    target = sol.Q(dirs)
    errors = [float(np.max(np.abs(evaluate(sol, r * dirs) / r**2 - target))) for r in radii]
    decreasing = all(b < a for a, b in zip(errors, errors[1:]))
    return BlowdownReport(radii, errors, decreasing, errors[-1] * radii[-1])
