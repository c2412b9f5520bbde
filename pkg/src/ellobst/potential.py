"""Newton potentials of homogeneous ellipsoids and of general convex bodies.

The potential is normalised so that ``Laplacian(NP) = -indicator(body)``::

    NP(x) = c(n) * integral_K |x - y|^(2-n) dy,   c(n) = 1 / (n (n-2) |B_1|)

For an ellipsoid with semi-axes ``a`` the classical one-dimensional
representation in the ellipsoidal coordinate ``lambda(x)`` is used::

    NP(x) = prod(a)/4 * int_lambda^inf (1 - sum x_i^2/(a_i^2+s)) ds / D(s)
    D(s)  = prod sqrt(a_i^2 + s)

Inside the ellipsoid (``lambda = 0``) this is ``NP(0) - sum kappa_i x_i^2``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad_vec
from scipy.special import elliprd, elliprf

from .bodies import DEFAULT_RESOLUTION, ConvexBody
from .errors import QuadratureError, ValidationError
from .geometry import unit_ball_volume

EPSABS = 1e-12
BISECT_WIDTH = 1e-3
NEWTON_TOL = 1e-13
CHUNK = 20000


@dataclass(frozen=True)
class PotentialNormalization:
    dim: int

    def __post_init__(self):
        if self.dim < 3:
            raise ValidationError("Newton kernel |x|^(2-n) needs n >= 3")

    @property
    def kernel_constant(self) -> float:
        n = self.dim
        return 1.0 / (n * (n - 2) * unit_ball_volume(n))


def kernel_constant(n: int) -> float:
    return PotentialNormalization(n).kernel_constant


def _axes(axes) -> np.ndarray:
    a = np.asarray(axes, dtype=float).ravel()
    if a.size < 3:
        raise ValidationError("Newton potentials are defined here for n >= 3")
    if np.any(~np.isfinite(a)) or np.any(a <= 0):
        raise ValidationError(f"semi-axes must be positive, got {a}")
    return a


def _points(x, n):
    pts = np.asarray(x, dtype=float)
    if pts.shape[-1] != n:
        raise ValidationError(f"points must have dimension {n}")
    return pts


def _tail_integral(integrand, lam: np.ndarray, scale: np.ndarray, what: str) -> np.ndarray:
    """``int_lam^inf integrand(s) ds`` for a batch of lower limits.

    ``s = lam + scale*((1-t)^-2 - 1)`` maps ``[0, 1)`` onto ``[lam, inf)``.
    With ``D(s) ~ s^(n/2)`` the transformed integrand stays bounded at
    ``t -> 1`` for every n >= 3, so plain adaptive Gauss-Kronrod converges.
    """

    def f(t):
        u = 1.0 / (1.0 - t)
        s = lam + scale * (u * u - 1.0)
        jac = 2.0 * scale * u**3
        val = integrand(s)
        return val * (jac if val.ndim == 1 else jac[:, None])

    res, err, info = quad_vec(f, 0.0, 1.0, epsabs=EPSABS, epsrel=0.0, norm="max",
                              full_output=True, limit=2000)
    if info.status != 0 or not np.all(np.isfinite(res)):
        raise QuadratureError(f"{what}: adaptive quadrature failed (status {info.status}, err {err:.3g})")
    return res


def kappa_coefficients(axes) -> np.ndarray:
    """Interior quadratic coefficients: ``NP(x) = NP(0) - sum kappa_i x_i^2`` in E.

    ``kappa_i = prod(a)/4 * int_0^inf ds / ((a_i^2+s) D(s))``.  They sum to
    1/2 and depend only on the shape, not the size, of the ellipsoid.
    """
    a = _axes(axes)
    a2 = a * a
    pref = np.prod(a / a.min()) / 4.0
    # Work with axes scaled to a_min = 1: kappa is homogeneous of degree 0.
    b2 = a2 / a2.min()

    def g(s):
        s = np.atleast_1d(s)[0]
        return 1.0 / ((b2 + s) * np.prod(np.sqrt(b2 + s)))

    res = _tail_integral(lambda s: g(s), np.zeros(1), np.ones(1), "kappa")
    return pref * res


def ellipsoidal_coordinate(axes, x) -> np.ndarray:
    """Largest root of ``sum x_i^2/(a_i^2 + lambda) = 1``; zero in the closed ellipsoid.

    Bisection on ``[0, |x|^2]`` to width ``1e-3`` then Newton from the left
    end, where the convex decreasing function guarantees monotone convergence.
    """
    a = _axes(axes)
    pts = _points(x, a.size)
    flat = pts.reshape(-1, a.size)
    a2 = a * a
    x2 = flat**2
    lam = np.zeros(len(flat))
    ext = np.sum(x2 / a2, axis=1) > 1.0
    if np.any(ext):
        y2 = x2[ext]
        lo = np.zeros(len(y2))
        hi = np.sum(y2, axis=1)
        while True:
            wide = hi - lo > BISECT_WIDTH
            if not np.any(wide):
                break
            mid = 0.5 * (lo + hi)
            pos = np.sum(y2 / (a2 + mid[:, None]), axis=1) > 1.0
            lo = np.where(wide & pos, mid, lo)
            hi = np.where(wide & ~pos, mid, hi)
        L = lo
        for _ in range(100):
            den = a2 + L[:, None]
            f = np.sum(y2 / den, axis=1) - 1.0
            df = -np.sum(y2 / den**2, axis=1)
            step = -f / df
            L = L + step
            if np.all(np.abs(step) <= NEWTON_TOL * np.maximum(1.0, L)):
                break
        lam[ext] = L
    return lam.reshape(pts.shape[:-1])


def _np_quadrature(a, pts, lam, grad: bool):
    a2 = a * a
    n = a.size
    scale = a2.min() + lam
    pref = np.prod(a)

    if grad:
        def g(s):
            den = a2[None, :] + s[:, None]
            return 1.0 / (den * np.prod(np.sqrt(den), axis=1)[:, None])

        I = _tail_integral(g, lam, scale, "potential gradient")
        return -0.5 * pref * pts * I

    x2 = pts**2

    def g(s):
        den = a2[None, :] + s[:, None]
        return (1.0 - np.sum(x2 / den, axis=1)) / np.prod(np.sqrt(den), axis=1)

    return 0.25 * pref * _tail_integral(g, lam, scale, "potential")


def _np_carlson(a, pts, lam, grad: bool):
    a2 = a * a
    A = a2[None, :] + lam[:, None]
    rd = np.column_stack([elliprd(A[:, 1], A[:, 2], A[:, 0]),
                          elliprd(A[:, 0], A[:, 2], A[:, 1]),
                          elliprd(A[:, 0], A[:, 1], A[:, 2])])
    pref = np.prod(a)
    if grad:
        return -0.5 * pref * pts * (2.0 / 3.0) * rd
    rf = elliprf(A[:, 0], A[:, 1], A[:, 2])
    return 0.25 * pref * (2.0 * rf - (2.0 / 3.0) * np.sum(pts**2 * rd, axis=1))


def _evaluate(axes, x, grad: bool, method: str):
    a = _axes(axes)
    pts = _points(x, a.size)
    flat = pts.reshape(-1, a.size)
    if method == "auto":
        method = "carlson" if a.size == 3 else "quadrature"
    if method == "carlson" and a.size != 3:
        raise ValidationError("Carlson closed forms are only available for n = 3")
    if method not in ("carlson", "quadrature"):
        raise ValidationError(f"unknown method {method!r}")
    lam = ellipsoidal_coordinate(a, flat)
    kernel = _np_carlson if method == "carlson" else _np_quadrature
    out = []
    for i in range(0, len(flat), CHUNK):
        sl = slice(i, i + CHUNK)
        out.append(kernel(a, flat[sl], lam[sl], grad))
    res = np.concatenate(out) if out else np.zeros((0, a.size) if grad else 0)
    shape = pts.shape if grad else pts.shape[:-1]
    res = res.reshape(shape)
    return float(res) if res.ndim == 0 else res


def ellipsoid_potential(axes, x, method: str = "quadrature"):
    """Newton potential of the centred ellipsoid with semi-axes ``axes``.

    Args:
        axes: semi-axes ``a_1..a_n``, ``n >= 3``.
        x: point or ``(..., n)`` array of points.
        method: ``"quadrature"`` (adaptive Gauss-Kronrod, any n),
            ``"carlson"`` (symmetric elliptic integrals, n = 3 only) or
            ``"auto"``.
    """
    return _evaluate(axes, x, False, method)


def ellipsoid_potential_gradient(axes, x, method: str = "quadrature"):
    """``d NP / d x_i = -prod(a)/2 * x_i * int_lambda^inf ds / ((a_i^2+s) D(s))``."""
    return _evaluate(axes, x, True, method)


def conductor_potential(axes, x) -> np.ndarray:
    """``int_lambda^inf ds / D(s)``: harmonic outside E, constant on and inside E."""
    a = _axes(axes)
    pts = _points(x, a.size)
    flat = pts.reshape(-1, a.size)
    lam = ellipsoidal_coordinate(a, flat)
    a2 = a * a

    def g(s):
        return 1.0 / np.prod(np.sqrt(a2[None, :] + s[:, None]), axis=1)

    return _tail_integral(g, lam, a2.min() + lam, "conductor potential").reshape(pts.shape[:-1])


# --------------------------------------------------------------------------
# general convex bodies


def _potential_polar(body: ConvexBody, x, resolution):
    # radial part: int_0^rho r^(2-n) r^(n-1) dr = rho^2 / 2
    _, w, rho = body.polar_rule(x, resolution)
    return kernel_constant(body.dim) * 0.5 * float(np.sum(w * rho**2))


def _potential_volume(body: ConvexBody, x, resolution):
    nodes, w = body.sample(resolution)
    r = np.linalg.norm(nodes - x, axis=1)
    return kernel_constant(body.dim) * float(np.sum(w * r ** (2 - body.dim)))


def body_potential_estimate(body: ConvexBody, x, resolution: int = DEFAULT_RESOLUTION):
    """``(value, error_estimate)`` for the Newton potential of ``body`` at ``x``.

    Points of the body use the polar rule centred at ``x`` (the radial integral
    is exact, so the kernel singularity never reaches the quadrature); other
    points use the volume rule.  The error estimate compares against half
    the resolution.
    """
    x = np.asarray(x, dtype=float)
    if body.dim < 3:
        raise ValidationError("Newton kernel needs n >= 3")
    route = _potential_polar if bool(body.contains(x)) else _potential_volume
    value = route(body, x, resolution)
    coarse = route(body, x, max(2, resolution // 2))
    return value, abs(value - coarse)


def body_potential(body: ConvexBody, x, resolution: int = DEFAULT_RESOLUTION, tol: float | None = None) -> float:
    """Newton potential ``c(n) int_K |x-y|^(2-n) dy`` by quadrature.

    Raises :class:`QuadratureError` if ``tol`` is given and the resolution
    cannot meet it.
    """
    value, err = body_potential_estimate(body, x, resolution)
    if tol is not None and err > tol:
        raise QuadratureError(f"resolution {resolution} gives error estimate {err:.3g} > {tol:.3g}")
    return value


def body_field(body: ConvexBody, x, resolution: int = DEFAULT_RESOLUTION) -> np.ndarray:
    """``F(x) = int_K (y - x) / |y - x|^n dy``.

    The gradient of :func:`body_potential` is ``(n - 2) c(n) F(x)``.
    """
    x = np.asarray(x, dtype=float)
    n = body.dim
    if bool(body.contains(x)):
        # radial part: int_0^rho r * r^-n * r^(n-1) dr = rho
        dirs, w, rho = body.polar_rule(x, resolution)
        return (w * rho) @ dirs
    nodes, w = body.sample(resolution)
    d = nodes - x
    r = np.linalg.norm(d, axis=1)
    return (w / r**n) @ d
