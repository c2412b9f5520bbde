"""The kernel-weighted centre of a convex body.

Finds ``x0`` in ``K`` with ``F(x0) = int_K (y - x0)/|y - x0|^n dy = 0`` as the
``eps -> 0`` limit of fixed points of the regularised averaging map::

    T_eps(x) = int_K y |y-x|^(eps-n) dy / int_K |y-x|^(eps-n) dy

For ``x`` in ``K`` the radial integrals are done exactly along the rays of the
body's polar rule centred at ``x``; for ``x`` outside ``K`` the volume rule
is used.  Either way ``T_eps(x)`` is a positive average of points of ``K``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .bodies import DEFAULT_RESOLUTION, ConvexBody
from .errors import ConvergenceError, MembershipViolation, ValidationError
from .geometry import unit_ball_volume
from .potential import body_field

log = logging.getLogger(__name__)

MAX_ITER = 500
DAMP_AFTER = 50
MIN_EPS = 2.0**-20


def t_epsilon(body: ConvexBody, x, eps: float, resolution: int = DEFAULT_RESOLUTION) -> np.ndarray:
    """One application of the regularised averaging map."""
    if not 0 < eps < 1:
        raise ValidationError(f"eps must lie in (0, 1), got {eps}")
    x = np.asarray(x, dtype=float)
    n = body.dim
    if bool(body.contains(x)):
        dirs, w, rho = body.polar_rule(x, resolution)
        # int_0^rho r^(eps-1) dr = rho^eps/eps ; int_0^rho r^eps dr = rho^(1+eps)/(1+eps)
        den = np.sum(w * rho**eps) / eps
        num = (w * rho ** (1.0 + eps)) @ dirs / (1.0 + eps)
        return x + num / den
    nodes, w = body.sample(resolution)
    k = w * np.linalg.norm(nodes - x, axis=1) ** (eps - n)
    return k @ nodes / k.sum()


def gravity_residual(body: ConvexBody, x, resolution: int = DEFAULT_RESOLUTION):
    """``(F(x), error_estimate)`` with the estimate from halving the resolution."""
    F = body_field(body, x, resolution)
    coarse = body_field(body, x, max(2, resolution // 2))
    return F, float(np.linalg.norm(F - coarse))


@dataclass
class CentroidResult:
    x0: np.ndarray
    epsilon_trace: list = field(default_factory=list)
    residual: float = np.nan  # |F(x0)| / |B_1|, comparable to a distance
    iterations: int = 0
    damped_levels: list = field(default_factory=list)
    monotone_tail: bool = True

    def to_dict(self) -> dict:
        return {
            "x0": [float(v) for v in self.x0],
            "residual": float(self.residual),
            "iterations": int(self.iterations),
            "damped_levels": [float(e) for e in self.damped_levels],
            "monotone_tail": bool(self.monotone_tail),
            "epsilon_trace": [{"eps": float(e), "x": [float(v) for v in xe]} for e, xe in self.epsilon_trace],
        }


def _fixed_point(body, x, eps, resolution, tol):
    """Anderson-accelerated Picard iteration for ``T_eps(x) = x``.

    ``T_eps - id`` scales like ``eps``, so plain Picard contracts only by
    ``1 - O(eps)`` per step; the secant history removes that dependence.
    Returns ``(x, iterations, damped)``.
    """
    n = body.dim
    beta = 1.0
    damped = False
    X, G = [], []
    g = t_epsilon(body, x, eps, resolution) - x
    best = np.linalg.norm(g)
    stalls = 0
    for it in range(1, MAX_ITER + 1):
        # n |g| / eps approximates the distance to the fixed point
        if n * np.linalg.norm(g) / eps < tol:
            return x, it, damped
        if it == DAMP_AFTER or (stalls >= 5 and not damped):
            beta, damped = 0.5, True
            X, G = [], []
        X.append(x.copy())
        G.append(g.copy())
        X, G = X[-(n + 2):], G[-(n + 2):]
        if len(X) > 1:
            dX = np.diff(np.array(X), axis=0).T
            dG = np.diff(np.array(G), axis=0).T
            gamma, *_ = np.linalg.lstsq(dG, g, rcond=None)
            x_new = x + beta * g - (dX + beta * dG) @ gamma
        else:
            x_new = x + beta * g
        if not bool(body.contains(x_new)):
            # keep the iterate in K: fall back to the plain averaging step
            x_new = x + g
            X, G = [], []
        x = x_new
        g = t_epsilon(body, x, eps, resolution) - x
        norm = np.linalg.norm(g)
        if norm < best:
            best, stalls = norm, 0
        else:
            stalls += 1
    raise ConvergenceError(f"fixed point of T_eps not reached at eps={eps:g}", last=x)


def weighted_centroid(body: ConvexBody, tol: float = 1e-8, resolution: int = DEFAULT_RESOLUTION,
                      start=None) -> CentroidResult:
    """Point ``x0`` of ``body`` where ``int_K (y - x0)/|y - x0|^n dy`` vanishes.

    Fixed points ``x_eps`` are computed for ``eps = 1/2, 1/4, ...``.  Because
    ``x_eps = x0 + C eps + O(eps^2)``, consecutive levels are combined by
    Richardson extrapolation; the schedule stops once two extrapolants agree
    to ``tol`` (or ``eps`` drops below ``2^-20``).

    Raises:
        MembershipViolation: if ``x0`` is not in the body.
    """
    x = np.array(body.center if start is None else start, dtype=float)
    trace = []
    estimates = []
    damped_levels = []
    iters = 0
    inner_tol = 1e-3 * tol
    eps = 0.5
    while eps >= MIN_EPS:
        x, it, damped = _fixed_point(body, x, eps, resolution, inner_tol)
        iters += it
        if damped:
            damped_levels.append(eps)
        trace.append((eps, x.copy()))
        if len(trace) >= 2:
            estimates.append(2.0 * trace[-1][1] - trace[-2][1])
            if len(estimates) >= 2 and np.linalg.norm(estimates[-1] - estimates[-2]) < tol:
                break
        eps *= 0.5
    x0 = estimates[-1] if estimates else x
    if not bool(body.contains(x0)):
        # the extrapolant can only leave K by rounding at a boundary; the raw
        # fixed point always lies in K
        x0 = trace[-1][1]
    if not bool(body.contains(x0)):
        raise MembershipViolation(f"centroid {x0} lies outside the body")

    F, _ = gravity_residual(body, x0, resolution)
    residual = float(np.linalg.norm(F)) / unit_ball_volume(body.dim)
    if residual > tol:
        log.warning("centroid residual %.3g exceeds tolerance %.3g", residual, tol)

    dists = [np.linalg.norm(xe - x0) for _, xe in trace[-3:]]
    monotone = all(b <= a for a, b in zip(dists, dists[1:]))
    if not monotone:
        log.warning("eps-schedule fixed points do not approach x0 monotonically")
    return CentroidResult(x0, trace, residual, iters, damped_levels, monotone)
