"""Numerical experiments for the ellipsoid characterisation of coincidence sets.

Each function checks one ingredient of the argument on concrete data:

* :func:`verify_decomposition` - ``u - p`` equals the body's Newton potential
  up to the constant ``-NP(0)``.
* :func:`comparison_experiment` - ordering ``u >= U_r`` outside ``E_r``
  whenever ``K`` sits inside ``E_r``.
* :func:`find_touching_radius` - the first ``r`` at which ``E_r`` meets ``K``.
* :func:`hopf_check` - normal slope and gradients at the contact point.
* :func:`verify_ellipsoid_verdict` - grid field to fitted ellipsoid.

Functions take the solution ``u`` as a vectorised callable on ``(N, n)``
arrays; grid fields are wrapped by :func:`field_function`.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.ndimage import distance_transform_edt

from .bodies import ConvexBody, EllipsoidBody, PolytopeBody
from .centroid import weighted_centroid
from .errors import PreconditionError, ValidationError
from .geometry import Ellipsoid, QuadraticBlowdown, fit_ellipsoid, quadric_value, scale
from .obstacle import GridField, coincidence_mask
from .potential import body_field, body_potential, kernel_constant
from .solution import RescaledSolution, axes_from_blowdown

HOPF_OFFSETS = (1.0, 2.0, 4.0)


def field_function(fld: GridField):
    """Multilinear interpolant of a grid field as a vectorised callable."""
    interp = fld.interpolator()

    def u(x):
        pts = np.asarray(x, dtype=float)
        return interp(pts.reshape(-1, fld.spec.dim)).reshape(pts.shape[:-1])

    return u


def fd_gradient(u, x, step: float) -> np.ndarray:
    """Central-difference gradient of a vectorised callable at one point."""
    x = np.asarray(x, dtype=float)
    n = x.size
    pts = np.concatenate([x + step * np.eye(n), x - step * np.eye(n)])
    vals = np.asarray(u(pts), dtype=float)
    return (vals[:n] - vals[n:]) / (2.0 * step)


# --------------------------------------------------------------------------
# potential decomposition


@dataclass
class DecompositionReport:
    max_dev: float
    p0: float
    grad_p0: float
    np_at_origin: float
    probes: int


def verify_decomposition(u, Q: QuadraticBlowdown, body: ConvexBody, probes, resolution: int = 48,
                         fd_step: float = 1e-3) -> DecompositionReport:
    """Compare ``v = u - x^T Q x`` with ``v_NP - v_NP(0)`` at the probes.

    ``K`` must contain the origin in its interior (translate by the weighted
    centroid first).  ``grad_p0`` compares a finite-difference gradient of
    ``v`` at 0 with ``(n-2) c(n) F(0)``.
    """
    n = body.dim
    origin = np.zeros(n)
    if not bool(body.contains(origin)):
        raise PreconditionError("the origin must lie in K; translate by the weighted centroid first")
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    np0 = body_potential(body, origin, resolution)
    vnp = np.array([body_potential(body, p, resolution) for p in probes])
    v = np.asarray(u(probes)) - Q(probes)
    max_dev = float(np.max(np.abs(v - (vnp - np0))))
    p0 = float(np.asarray(u(origin[None, :]))[0]) - np0
    grad_v0 = fd_gradient(lambda x: np.asarray(u(x)) - Q(x), origin, fd_step)
    grad_np0 = (n - 2) * kernel_constant(n) * body_field(body, origin, resolution)
    return DecompositionReport(max_dev, p0, float(np.linalg.norm(grad_v0 - grad_np0)), np0, len(probes))


# --------------------------------------------------------------------------
# comparison with the rescaled family


@dataclass
class ComparisonReport:
    r: float
    min_gap: float
    probes: int
    measure_gap: float  # |E_r \ K|
    strict: bool  # min_gap > 0 over all probes

    @property
    def ordered(self) -> bool:
        return self.min_gap >= 0.0


def _contained(body: ConvexBody, E: Ellipsoid, resolution: int, slack: float = 1e-12) -> bool:
    pts = np.vstack([body.boundary_points(resolution), body.sample(max(4, resolution // 2))[0]])
    return bool(np.all(quadric_value(E, pts) <= 1.0 + slack))


def comparison_experiment(u, sol, r: float, probes, body: ConvexBody, resolution: int = 16) -> ComparisonReport:
    """Minimum of ``u - U_r`` over the probes lying outside ``E_r = E / r``.

    Raises:
        PreconditionError: ``K`` is not contained in ``E_r``; this is reported
            separately and never as a failed ordering.
    """
    Er = scale(sol.ellipsoid, r)
    if not _contained(body, Er, resolution):
        raise PreconditionError(f"K is not contained in E_r for r = {r:g}")
    nodes, w = EllipsoidBody(Er).sample(resolution)
    measure = float(np.sum(w[~body.contains(nodes)]))
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    outside = probes[quadric_value(Er, probes) > 1.0]
    if len(outside) == 0:
        raise ValidationError("no probe lies outside E_r")
    U = RescaledSolution(sol, r)
    gaps = np.asarray(u(outside)) - U(outside)
    mg = float(np.min(gaps))
    return ComparisonReport(float(r), mg, len(outside), measure, mg > 0.0)


def exterior_probes(E: Ellipsoid, count: int = 1000, factors=(1.05, 1.2, 1.5, 2.0, 3.0), seed: int = 0):
    """Deterministic probes on dilated copies of ``dE``."""
    rng = np.random.default_rng(seed)
    per = int(np.ceil(count / len(factors)))
    g = rng.standard_normal((per * len(factors), E.dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    f = np.repeat(np.asarray(factors, dtype=float), per)
    return (g * E.axes * f[:, None] + np.asarray(E.center))[:count]


# --------------------------------------------------------------------------
# first contact and normal slope


@dataclass
class TouchRadius:
    r0: float
    x_touch: np.ndarray


def find_touching_radius(K, E: Ellipsoid, resolution: int = 24) -> TouchRadius:
    """Largest ``r`` with ``K`` inside ``E / r``: ``r0 = (max_K x^T A x)^(-1/2)``.

    ``K`` may be a :class:`ConvexBody` or an ``(N, n)`` array of points (for
    example the nodes of a coincidence mask).
    """
    if not E.is_centered:
        raise ValidationError("E must be centred at the origin")
    if isinstance(K, ConvexBody):
        cand = K.boundary_points(resolution)
        vals = quadric_value(E, cand)
        best = cand[np.argmax(vals)]
        if not isinstance(K, PolytopeBody):
            # maximise the quadric along the boundary, parametrised by direction
            c = K.center

            def neg(v):
                d = v / np.linalg.norm(v)
                return -float(quadric_value(E, c + K.radial(c, d[None, :])[0] * d))

            res = optimize.minimize(neg, best - c, method="Nelder-Mead",
                                    options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 4000})
            d = res.x / np.linalg.norm(res.x)
            refined = c + K.radial(c, d[None, :])[0] * d
            if quadric_value(E, refined) > quadric_value(E, best):
                best = refined
        top = float(quadric_value(E, best))
    else:
        pts = np.atleast_2d(np.asarray(K, dtype=float))
        if pts.size == 0:
            raise ValidationError("K is empty")
        vals = quadric_value(E, pts)
        i = int(np.argmax(vals))
        best, top = pts[i], float(vals[i])
    if top <= 0:
        raise ValidationError("K reduces to the origin")
    return TouchRadius(top**-0.5, np.asarray(best, dtype=float))


@dataclass
class TouchReport:
    r0: float
    x_touch: np.ndarray
    min_gap_outside: float
    grad_u_at_touch: float
    grad_U_at_touch: float
    hopf_slope: float
    quotients: list
    noise: float
    gap_noise: float
    verdict: str

    def to_dict(self):
        d = dict(self.__dict__)
        d["x_touch"] = [float(v) for v in self.x_touch]
        d["quotients"] = [float(q) for q in self.quotients]
        return d


VERDICT_EQUAL = "K = E_r0"
VERDICT_CONTRADICTION = "ordering + Hopf contradiction: K != E_r0 impossible for true solutions"
VERDICT_FLAT = "strict ordering with flat contact (Hopf sign absent)"
VERDICT_INCONCLUSIVE = "inconclusive"


def hopf_check(u, sol, r0: float, x_touch, h_probe: float, probes=None, gap_noise: float | None = None,
               collar: float | None = None) -> TouchReport:
    """Normal slope of ``u - U_r0`` and gradients of both at the contact point.

    The slope is the derivative along the outer normal of the exterior
    tangent ball at ``x_touch`` (pointing into ``E_r0``), estimated from
    one-sided difference quotients at offsets ``h, 2h, 4h`` and linear
    extrapolation to zero offset.  Floating point cannot certify a strict
    sign, so everything within ``10 h`` is treated as zero.
    """
    U = RescaledSolution(sol, r0)
    Er = U.ellipsoid
    x0 = np.asarray(x_touch, dtype=float)
    if abs(float(quadric_value(Er, x0)) - 1.0) > 1e-8:
        raise ValidationError("x_touch is not on the boundary of E_r0")
    normal = x0 / Er.axes**2
    normal /= np.linalg.norm(normal)

    def diff(x):
        return np.asarray(u(x)) - U(x)

    t = h_probe * np.asarray(HOPF_OFFSETS)
    base = diff(x0[None, :])[0]
    quot = (diff(x0 + t[:, None] * normal) - base) / t
    intercept = np.polyfit(t, quot, 1)[1]
    slope = -float(intercept)  # derivative along the inward (into E) direction

    noise = 10.0 * h_probe
    gap_noise = 10.0 * h_probe**2 if gap_noise is None else gap_noise
    collar = 4.0 * h_probe if collar is None else collar
    probes = exterior_probes(Er) if probes is None else np.atleast_2d(probes)
    probes = probes[(quadric_value(Er, probes) > 1.0) & (np.linalg.norm(probes - x0, axis=1) > collar)]
    min_gap = float(np.min(diff(probes)))

    gu = float(np.linalg.norm(fd_gradient(u, x0, h_probe)))
    gU = float(np.linalg.norm(fd_gradient(U, x0, h_probe)))

    if abs(min_gap) <= gap_noise and abs(slope) <= noise:
        verdict = VERDICT_EQUAL
    elif min_gap > gap_noise and slope < -noise:
        verdict = VERDICT_CONTRADICTION
    elif min_gap > gap_noise and abs(slope) <= noise:
        verdict = VERDICT_FLAT
    else:
        verdict = VERDICT_INCONCLUSIVE
    return TouchReport(float(r0), x0, min_gap, gu, gU, slope, list(quot), noise, gap_noise, verdict)


# --------------------------------------------------------------------------
# end to end


def mask_hausdorff(mask: np.ndarray, h: float, reference: np.ndarray) -> float:
    """Hausdorff distance between two node sets on the same grid."""
    if not mask.any() or not reference.any():
        return np.inf
    to_ref = distance_transform_edt(~reference) * h
    to_mask = distance_transform_edt(~mask) * h
    return float(max(to_ref[mask].max(), to_mask[reference].max()))


def free_boundary_points(fld: GridField, mask: np.ndarray, band: float = 2.5) -> np.ndarray:
    """Sub-cell free-boundary locations estimated from nodes just outside the mask.

    Off the coincidence set ``u`` grows like ``d^2 / 2`` in the distance
    ``d`` to the free boundary, so each positive node within ``band * h``
    is moved back by ``sqrt(2 u)`` along ``-grad u``.
    """
    spec = fld.spec
    h = spec.h
    u = np.maximum(fld.values, 0.0)
    grads = np.gradient(u, h)
    if spec.dim == 1:
        grads = [grads]
    sel = ~mask & (u > 0.0) & (u < 0.5 * (band * h) ** 2)
    sel &= ~spec.boundary_mask()
    g = np.stack([gi[sel] for gi in grads], axis=1)
    norm = np.linalg.norm(g, axis=1)
    keep = norm > 0.0
    x = spec.nodes()[sel.ravel()][keep]
    d = np.sqrt(2.0 * u[sel][keep])
    return x - (d / norm[keep])[:, None] * g[keep]


@dataclass
class EllipsoidVerdict:
    fitted: Ellipsoid
    fit_residual: float
    axis_mismatch: float  # against the unit-product axes realising Q
    shape_mismatch: float  # after the best uniform rescaling
    scale: float
    hausdorff: float
    centroid: np.ndarray
    expected_axes: np.ndarray
    mask_nodes: int
    details: dict = field(default_factory=dict)


def check_mask(fld: GridField, mask: np.ndarray):
    if not mask.any():
        raise ValidationError("coincidence set is empty")
    inner = np.zeros_like(mask)
    inner[tuple(slice(2, -2) for _ in range(fld.spec.dim))] = True
    if np.any(mask & ~inner):
        raise ValidationError("coincidence set touches the box boundary; enlarge the box")


def verify_ellipsoid_verdict(fld: GridField, Q: QuadraticBlowdown, centroid_tol: float | None = None,
                             centroid_resolution: int = 4) -> EllipsoidVerdict:
    """Extract ``{u = 0}`` from a solved field and decide whether it is the expected ellipsoid.

    Pipeline: coincidence mask, weighted centroid of its convex hull,
    translation, sub-cell free-boundary points, quadric fit, comparison with
    the axes realising ``Q``.  Raises :class:`ValidationError` for an empty
    mask or one reaching the edge of the box.
    """
    spec = fld.spec
    if spec.dim != Q.dim:
        raise ValidationError("Q and grid differ in dimension")
    if not np.all(np.isfinite(fld.values)):
        raise ValidationError("field contains non-finite values")
    mask = coincidence_mask(fld)
    check_mask(fld, mask)
    h = spec.h
    nodes = spec.nodes()[mask.ravel()]
    hull = PolytopeBody(nodes, kind="mask-hull")
    cen = weighted_centroid(hull, tol=centroid_tol or 1e-3 * h, resolution=centroid_resolution)
    x0 = cen.x0
    fb = free_boundary_points(fld, mask) - x0
    fitted, resid = fit_ellipsoid(fb)
    fitted_abs = fitted.translated(x0)
    expected = axes_from_blowdown(Q)
    fa = fitted.axes
    sc = float(np.prod(fa) ** (1.0 / len(fa)))
    inside = quadric_value(fitted_abs, spec.nodes()).reshape(spec.shape) <= 1.0
    haus = mask_hausdorff(mask, h, inside)
    return EllipsoidVerdict(fitted_abs, resid, float(np.max(np.abs(fa - expected))),
                            float(np.max(np.abs(fa - sc * expected))), sc, haus, x0, expected,
                            int(mask.sum()), {"centroid": cen.to_dict(), "boundary_points": len(fb)})


# --------------------------------------------------------------------------
# report


REPORT_SCHEMA = "ellobst.verification/1"


def _invariant(name, value, threshold, passed, note=""):
    return {"name": name, "value": None if value is None else float(value),
            "threshold": None if threshold is None else float(threshold),
            "passed": bool(passed), "note": note}


def run_verification(fld: GridField, Q: QuadraticBlowdown, sampled: bool = False,
                     residual_tol: float | None = None, probe_count: int = 400, seed: int = 0) -> dict:
    """Full verification of a field against the ellipsoid verdict.

    Returns a JSON-ready report; ``report["passed"]`` is the conjunction of the
    per-invariant flags.  ``sampled=True`` marks fields sampled from an exact
    solution, which satisfy the discrete complementarity system only to
    ``O(h^2)``.
    """
    from .obstacle import complementarity_residual
    from .potential import ellipsoid_potential
    from .solution import EllipsoidSolution

    spec = fld.spec
    h = spec.h
    scale_u = max(1.0, float(np.nanmax(np.abs(fld.values))) if np.isfinite(fld.values).any() else 1.0)
    if residual_tol is None:
        residual_tol = h * h if sampled else 1e-8 * scale_u
    tol = {"residual": residual_tol, "fit_residual": 4 * h * h, "axis_mismatch": 2 * h,
           "hausdorff": 2 * h, "decomposition": 10 * h * h, "touch_gradient": 10 * h,
           "ordering_noise": 10 * h * h}
    inv = []
    report = {"schema": REPORT_SCHEMA, "grid": {"dim": spec.dim, "box_radius": spec.box_radius,
                                                "points_per_axis": spec.points_per_axis, "h": h},
              "q": [float(v) for v in Q.diag], "sampled": bool(sampled), "tolerances": tol,
              "invariants": inv}

    bad = int(np.count_nonzero(~np.isfinite(fld.values)))
    inv.append(_invariant("finite_field", bad, 0, bad == 0, "count of non-finite node values"))
    res = complementarity_residual(fld)
    report["complementarity"] = {"max_neg_u": res.max_neg_u, "max_excess_laplacian": res.max_excess_laplacian,
                                 "max_product": res.max_product}
    inv.append(_invariant("complementarity_residual", res.max(), residual_tol, res.max() <= residual_tol))

    def finish():
        report["passed"] = all(i["passed"] for i in inv)
        return report

    if bad:
        for name in ("ellipsoid_verdict",):
            inv.append(_invariant(name, None, None, False, "skipped: field has non-finite values"))
        return finish()
    try:
        verdict = verify_ellipsoid_verdict(fld, Q)
    except Exception as exc:  # empty mask, degenerate fit, ...
        inv.append(_invariant("ellipsoid_verdict", None, None, False, f"{type(exc).__name__}: {exc}"))
        return finish()

    x0 = verdict.centroid
    fitted = verdict.fitted
    report["centroid"] = [float(v) for v in x0]
    report["fitted"] = {"center": [float(v) for v in fitted.center], "axes": [float(v) for v in fitted.axes],
                        "quadric_diagonal": [float(v) for v in 1.0 / fitted.axes**2],
                        "expected_axes_unit_volume": [float(v) for v in verdict.expected_axes],
                        "scale": verdict.scale, "mask_nodes": verdict.mask_nodes}
    inv.append(_invariant("fit_residual", verdict.fit_residual, tol["fit_residual"],
                          verdict.fit_residual <= tol["fit_residual"]))
    inv.append(_invariant("axis_mismatch", verdict.axis_mismatch, tol["axis_mismatch"],
                          verdict.axis_mismatch <= tol["axis_mismatch"], "fitted axes vs axes realising Q"))
    inv.append(_invariant("shape_mismatch", verdict.shape_mismatch, tol["axis_mismatch"],
                          verdict.shape_mismatch <= tol["axis_mismatch"], "after best uniform rescaling"))
    inv.append(_invariant("hausdorff_mask_fitted", verdict.hausdorff, tol["hausdorff"],
                          verdict.hausdorff <= tol["hausdorff"]))

    u_grid = field_function(fld)

    def u(x):
        return u_grid(np.asarray(x) + x0)

    mask = coincidence_mask(fld)
    inner = np.max(np.abs(spec.nodes()), axis=1) < spec.box_radius - 2 * h

    # step 1 with K = fitted ellipsoid, centred at the weighted centroid
    Kfit = Ellipsoid(tuple(fitted.axes))
    probes = exterior_probes(Kfit, probe_count, factors=(1.2, 1.5, 2.0), seed=seed + 1)
    probes = probes[np.max(np.abs(probes + x0), axis=1) < spec.box_radius - 2 * h]
    interior = exterior_probes(Kfit, probe_count // 4, factors=(0.3, 0.6), seed=seed + 2)
    probes = np.vstack([probes, interior])
    v = u(probes) - Q(probes)
    np0 = ellipsoid_potential(Kfit.axes, np.zeros(spec.dim))
    dev = float(np.max(np.abs(v - (ellipsoid_potential(Kfit.axes, probes) - np0))))
    p0 = float(u(np.zeros((1, spec.dim)))[0]) - np0
    report["decomposition"] = {"max_dev": dev, "p0": p0, "probes": len(probes)}
    inv.append(_invariant("decomposition_max_dev", dev, tol["decomposition"], dev <= tol["decomposition"]))
    inv.append(_invariant("decomposition_p0_negative", p0, 0.0, p0 < 0.0))

    # steps 3 and 4 against the exact solution with the prescribed blow-down
    sol = EllipsoidSolution.from_blowdown(Q)
    mask_pts = spec.nodes()[(mask & inner.reshape(spec.shape)).ravel()] - x0
    touch = find_touching_radius(mask_pts, sol.ellipsoid)
    r0 = touch.r0
    report["touch"] = {"r0": r0, "x_touch": [float(c) for c in touch.x_touch + x0]}
    r_test = r0 * (1.0 - 10.0 * h / spec.box_radius)
    Er = scale(sol.ellipsoid, r_test)
    outside = exterior_probes(Er, probe_count, seed=seed + 3)
    outside = outside[np.max(np.abs(outside + x0), axis=1) < spec.box_radius - 2 * h]
    gap = float(np.min(u(outside) - RescaledSolution(sol, r_test)(outside)))
    report["ordering"] = {"r": r_test, "min_gap": gap, "probes": len(outside)}
    inv.append(_invariant("rescaled_ordering", gap, -tol["ordering_noise"], gap >= -tol["ordering_noise"],
                          "min of u - U_r outside E_r at r = r0 (1 - 10h/R)"))
    hopf = hopf_check(u, sol, r0, touch.x_touch, h, probes=outside, gap_noise=tol["ordering_noise"])
    report["hopf"] = hopf.to_dict()
    inv.append(_invariant("touch_gradient_u", hopf.grad_u_at_touch, tol["touch_gradient"],
                          hopf.grad_u_at_touch <= tol["touch_gradient"]))
    inv.append(_invariant("touch_gradient_U", hopf.grad_U_at_touch, tol["touch_gradient"],
                          hopf.grad_U_at_touch <= tol["touch_gradient"]))
    return finish()
