"""Convex bodies with deterministic polar quadrature.

Every body exposes a *polar rule* about an interior point ``x``: unit
directions ``theta_k``, positive angular weights ``w_k`` and exit distances
``rho_k`` such that ``sum_k w_k g(theta_k) ~ integral over the unit sphere``.
Integrals over the body whose radial part is known in closed form (Newton
kernels, the weighted-centroid map) then only need the angular sum, which
removes the kernel singularity at ``x`` entirely.
"""
from __future__ import annotations

from functools import lru_cache
from math import gamma

import numpy as np
from scipy.spatial import ConvexHull
from scipy.special import roots_jacobi
from scipy.stats import special_ortho_group

from .errors import DimensionError, ValidationError
from .geometry import Ellipsoid, unit_ball_volume

DEFAULT_RESOLUTION = 24


# --------------------------------------------------------------------------
# reference rules


@lru_cache(maxsize=64)
def _jacobi01(k: int, alpha: float, beta: float):
    """Gauss-Jacobi on [0, 1] for the weight ``(1-u)^alpha u^beta``."""
    s, w = roots_jacobi(k, alpha, beta)
    return 0.5 * (s + 1.0), w * 2.0 ** (-alpha - beta - 1.0)


@lru_cache(maxsize=32)
def _sphere_rule_cached(n: int, k: int):
    if n == 1:
        return np.array([[-1.0], [1.0]]), np.array([1.0, 1.0])
    if n == 2:
        phi = np.pi * (np.arange(2 * k) + 0.5) / k
        return np.column_stack([np.cos(phi), np.sin(phi)]), np.full(2 * k, np.pi / k)
    alpha = (n - 3) / 2.0
    t, wt = roots_jacobi(k, alpha, alpha)
    sub, wsub = _sphere_rule_cached(n - 1, k)
    s = np.sqrt(1.0 - t**2)
    dirs = np.concatenate([np.column_stack([np.full(len(sub), ti), si * sub]) for ti, si in zip(t, s)])
    w = np.concatenate([wi * wsub for wi in wt])
    return dirs, w


def sphere_rule(n: int, resolution: int, seed: int = 0):
    """Product Gauss rule on the unit sphere in ``R^n``.

    ``seed = 0`` keeps the rule antipodally and coordinate-reflection
    symmetric; any other seed applies a fixed random rotation.
    """
    dirs, w = _sphere_rule_cached(n, int(resolution))
    if seed and n >= 2:
        R = special_ortho_group.rvs(n, random_state=seed)
        dirs = dirs @ R.T
    return dirs, w


@lru_cache(maxsize=32)
def simplex_rule(d: int, k: int):
    """Collapsed-coordinate Gauss rule on ``{u >= 0, sum u <= 1}`` in ``R^d``.

    Returns barycentric-free coordinates ``(N, d)`` and weights summing to
    ``1/d!``.
    """
    if d == 0:
        return np.zeros((1, 0)), np.ones(1)
    grids = [_jacobi01(k, float(d - 1 - i), 0.0) for i in range(d)]
    mesh = np.meshgrid(*[g[0] for g in grids], indexing="ij")
    wmesh = np.meshgrid(*[g[1] for g in grids], indexing="ij")
    u = np.column_stack([m.ravel() for m in mesh])
    w = np.prod(np.column_stack([m.ravel() for m in wmesh]), axis=1)
    x = np.empty_like(u)
    rest = np.ones(len(u))
    for i in range(d):
        x[:, i] = rest * u[:, i]
        rest = rest * (1.0 - u[:, i])
    return x, w


# --------------------------------------------------------------------------
# bodies


class ConvexBody:
    """Compact convex body with nonempty interior.

    Subclasses provide ``contains``; ``radial`` falls back to bisection on
    membership, which is the only thing a bare membership oracle supports.
    """

    kind = "generic"

    def __init__(self, dim: int, center, bounding_radius: float, volume_hint: float | None = None):
        if dim < 1:
            raise ValidationError("dimension must be positive")
        self.dim = int(dim)
        self.center = np.asarray(center, dtype=float).reshape(self.dim)
        self.bounding_radius = float(bounding_radius)
        self.volume_hint = volume_hint

    def contains(self, x) -> np.ndarray:
        raise NotImplementedError

    def _check(self, x) -> np.ndarray:
        pts = np.asarray(x, dtype=float)
        if pts.shape[-1] != self.dim:
            raise DimensionError(f"expected dimension {self.dim}, got shape {pts.shape}")
        return pts

    def radial(self, x, dirs) -> np.ndarray:
        """Exit distance from interior point ``x`` along each unit direction."""
        x = self._check(x)
        lo = np.zeros(len(dirs))
        hi = np.full(len(dirs), 2.0 * self.bounding_radius + np.linalg.norm(x))
        for _ in range(64):
            mid = 0.5 * (lo + hi)
            inside = self.contains(x + mid[:, None] * dirs)
            lo = np.where(inside, mid, lo)
            hi = np.where(inside, hi, mid)
        return 0.5 * (lo + hi)

    def polar_rule(self, x, resolution: int = DEFAULT_RESOLUTION, seed: int = 0):
        x = self._check(x)
        dirs, w = sphere_rule(self.dim, resolution, seed)
        return dirs, w, self.radial(x, dirs)

    def sample(self, resolution: int = DEFAULT_RESOLUTION, seed: int = 0):
        """Volume quadrature ``(nodes, weights)``; every node is a member."""
        dirs, w, rho = self.polar_rule(self.center, resolution, seed)
        tau, wt = _jacobi01(int(resolution), 0.0, float(self.dim - 1))
        nodes = self.center + (rho[:, None, None] * tau[None, :, None]) * dirs[:, None, :]
        weights = (w * rho**self.dim)[:, None] * wt[None, :]
        return nodes.reshape(-1, self.dim), weights.ravel()

    def volume(self, resolution: int = DEFAULT_RESOLUTION) -> float:
        if self.volume_hint is not None:
            return float(self.volume_hint)
        _, w, rho = self.polar_rule(self.center, resolution)
        return float(np.sum(w * rho**self.dim) / self.dim)

    def boundary_points(self, resolution: int = DEFAULT_RESOLUTION) -> np.ndarray:
        dirs, _, rho = self.polar_rule(self.center, resolution)
        return self.center + rho[:, None] * dirs

    def translated(self, shift) -> "ConvexBody":
        raise NotImplementedError

    def describe(self) -> dict:
        return {"kind": self.kind}


class EllipsoidBody(ConvexBody):
    kind = "ellipsoid"

    def __init__(self, ellipsoid: Ellipsoid):
        self.ellipsoid = ellipsoid
        a = ellipsoid.axes
        c = np.asarray(ellipsoid.center)
        super().__init__(ellipsoid.dim, c, np.linalg.norm(c) + a.max(), ellipsoid.volume)

    def contains(self, x):
        d = self._check(x) - self.center
        return np.sum(d**2 / self.ellipsoid.axes**2, axis=-1) <= 1.0

    def radial(self, x, dirs):
        a2 = self.ellipsoid.axes**2
        d = self._check(x) - self.center
        A = np.sum(dirs**2 / a2, axis=1)
        B = 2.0 * dirs @ (d / a2)
        C = min(float(np.sum(d**2 / a2)) - 1.0, 0.0)
        disc = np.sqrt(np.maximum(B * B - 4.0 * A * C, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            pos = np.where(B >= 0, -2.0 * C / (B + disc), (disc - B) / (2.0 * A))
        return np.where(np.isfinite(pos), pos, 0.0)

    def translated(self, shift):
        return EllipsoidBody(self.ellipsoid.translated(shift))

    def describe(self):
        return {"kind": "ellipsoid", "center": list(self.ellipsoid.center), "axes": list(self.ellipsoid.semi_axes)}


class SuperellipsoidBody(ConvexBody):
    """``{x : sum |(x_i - c_i)/a_i|^p <= 1}`` with ``p >= 1``."""

    kind = "superellipsoid"

    def __init__(self, axes, exponent: float, center=None):
        a = np.asarray(axes, dtype=float)
        if np.any(a <= 0) or exponent < 1:
            raise ValidationError("superellipsoid needs positive axes and exponent >= 1")
        self.axes = a
        self.exponent = float(exponent)
        n = len(a)
        c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
        g = gamma(1.0 + 1.0 / exponent)
        vol = float(np.prod(2.0 * a * g) / gamma(1.0 + n / exponent))
        super().__init__(n, c, np.linalg.norm(c) + np.linalg.norm(a), vol)

    def gauge(self, x):
        d = self._check(x) - self.center
        return np.sum(np.abs(d / self.axes) ** self.exponent, axis=-1)

    def contains(self, x):
        return self.gauge(x) <= 1.0

    def radial(self, x, dirs):
        x = self._check(x)
        lo = np.zeros(len(dirs))
        hi = np.full(len(dirs), 2.0 * self.bounding_radius)
        for _ in range(64):
            mid = 0.5 * (lo + hi)
            inside = self.gauge(x + mid[:, None] * dirs) <= 1.0
            lo = np.where(inside, mid, lo)
            hi = np.where(inside, hi, mid)
        return 0.5 * (lo + hi)

    def translated(self, shift):
        return SuperellipsoidBody(self.axes, self.exponent, self.center + np.asarray(shift, dtype=float))

    def describe(self):
        return {"kind": "superellipsoid", "center": self.center.tolist(), "axes": self.axes.tolist(),
                "exponent": self.exponent}


class PolytopeBody(ConvexBody):
    """Convex hull of finitely many points.

    The polar rule projects a Gauss rule on each triangulated facet onto the
    sphere, so kinks of the radial function along edges cost nothing.
    """

    kind = "polytope"

    def __init__(self, vertices, kind: str | None = None):
        pts = np.asarray(vertices, dtype=float)
        hull = ConvexHull(pts)
        self.hull = hull
        self.vertices = pts[hull.vertices]
        self.normals = hull.equations[:, :-1]
        self.offsets = -hull.equations[:, -1]
        self.facets = pts[hull.simplices]
        if kind:
            self.kind = kind
        self._tol = 1e-12 * max(1.0, float(np.abs(pts).max()))
        # Gram determinants give the (n-1)-volume factor of each facet map.
        edges = self.facets[:, 1:, :] - self.facets[:, :1, :]
        gram = np.einsum("fik,fjk->fij", edges, edges)
        self._jac = np.sqrt(np.abs(np.linalg.det(gram))) if pts.shape[1] > 1 else np.ones(len(self.facets))
        super().__init__(pts.shape[1], self.vertices.mean(axis=0),
                         float(np.max(np.linalg.norm(self.vertices, axis=1))), float(hull.volume))

    @classmethod
    def box(cls, lower, upper):
        lo = np.asarray(lower, dtype=float)
        hi = np.asarray(upper, dtype=float)
        if np.any(hi <= lo):
            raise ValidationError("box needs upper > lower in every coordinate")
        n = len(lo)
        corners = np.array(np.meshgrid(*[[0.0, 1.0]] * n, indexing="ij")).reshape(n, -1).T
        body = cls(lo + corners * (hi - lo), kind="box")
        body._box = (lo, hi)
        return body

    @classmethod
    def simplex(cls, vertices):
        v = np.asarray(vertices, dtype=float)
        if v.shape[0] != v.shape[1] + 1:
            raise ValidationError("a simplex in R^n needs n+1 vertices")
        return cls(v, kind="simplex")

    def slack(self, x) -> np.ndarray:
        """Distances to the facet hyperplanes (positive inside)."""
        return self.offsets - self._check(x) @ self.normals.T

    def contains(self, x):
        return np.all(self.slack(x) >= -self._tol, axis=-1)

    def radial(self, x, dirs):
        s = self.slack(x)
        rate = dirs @ self.normals.T
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(rate > 1e-15, np.maximum(s, 0.0) / rate, np.inf)
        return t.min(axis=1)

    def polar_rule(self, x, resolution: int = DEFAULT_RESOLUTION, seed: int = 0):
        x = self._check(x)
        d = self.dim - 1
        ref, wref = simplex_rule(d, int(resolution))
        dist = self.offsets - self.normals @ x
        keep = dist > self._tol
        facets, jac, dist = self.facets[keep], self._jac[keep], dist[keep]
        edges = facets[:, 1:, :] - facets[:, :1, :]
        z = facets[:, None, 0, :] + np.einsum("qd,fdk->fqk", ref, edges)
        v = z - x
        rho = np.linalg.norm(v, axis=2)
        w = (jac * dist)[:, None] * wref[None, :] / rho**self.dim
        dirs = v / rho[..., None]
        return dirs.reshape(-1, self.dim), w.ravel(), rho.ravel()

    def boundary_points(self, resolution: int = DEFAULT_RESOLUTION):
        return self.vertices.copy()

    def translated(self, shift):
        shifted = PolytopeBody(self.hull.points + np.asarray(shift, dtype=float), kind=self.kind)
        if hasattr(self, "_box"):
            shifted._box = tuple(b + np.asarray(shift, dtype=float) for b in self._box)
        return shifted

    def describe(self):
        if hasattr(self, "_box"):
            return {"kind": "box", "lower": self._box[0].tolist(), "upper": self._box[1].tolist()}
        return {"kind": self.kind, "vertices": self.vertices.tolist()}


def body_from_description(desc: dict) -> ConvexBody:
    """Build a body from ``{"kind": ..., parameters}``.

    Kinds: ``ellipsoid`` (axes, center), ``ball`` (radius, center, dim),
    ``box`` (lower, upper), ``simplex`` (vertices), ``superellipsoid``
    (axes, exponent, center).
    """
    kind = desc.get("kind")
    if kind == "ellipsoid":
        return EllipsoidBody(Ellipsoid(tuple(desc["axes"]), desc.get("center")))
    if kind == "ball":
        n = int(desc.get("dim", len(desc.get("center", [0.0] * 3))))
        return EllipsoidBody(Ellipsoid((float(desc.get("radius", 1.0)),) * n, desc.get("center")))
    if kind == "box":
        return PolytopeBody.box(desc["lower"], desc["upper"])
    if kind == "simplex":
        return PolytopeBody.simplex(desc["vertices"])
    if kind == "superellipsoid":
        return SuperellipsoidBody(desc["axes"], desc.get("exponent", 4.0), desc.get("center"))
    raise ValidationError(f"unknown body kind {kind!r}")


def ball_volume(n: int, radius: float = 1.0) -> float:
    return unit_ball_volume(n) * radius**n
