"""Axis-aligned ellipsoids, quadratic blow-downs and quadric fitting."""
from __future__ import annotations

from dataclasses import dataclass
from math import gamma, pi

import numpy as np

from .errors import DegenerateFitError, DimensionError, ValidationError

MAX_DIM = 4
TRACE_TOL = 1e-12


def unit_ball_volume(n: int) -> float:
    return pi ** (n / 2) / gamma(n / 2 + 1)


def _as_points(x, n: int) -> np.ndarray:
    pts = np.asarray(x, dtype=float)
    if pts.shape[-1] != n:
        raise DimensionError(f"expected points of dimension {n}, got shape {pts.shape}")
    return pts


@dataclass(frozen=True)
class Ellipsoid:
    """The body ``{x : sum((x - c)_i^2 / a_i^2) <= 1}``.

    Only axis-aligned ellipsoids are represented; general symmetric forms are
    brought to this shape with :func:`diagonalize_blowdown` first.
    """

    semi_axes: tuple
    center: tuple = None

    def __post_init__(self):
        axes = tuple(float(a) for a in np.ravel(self.semi_axes))
        if len(axes) < 1 or len(axes) > MAX_DIM:
            raise ValidationError(f"dimension must be in 1..{MAX_DIM}, got {len(axes)}")
        if not all(np.isfinite(a) and a > 0 for a in axes):
            raise ValidationError(f"semi-axes must be positive, got {axes}")
        center = (0.0,) * len(axes) if self.center is None else tuple(float(c) for c in np.ravel(self.center))
        if len(center) != len(axes):
            raise DimensionError("center and semi_axes differ in dimension")
        object.__setattr__(self, "semi_axes", axes)
        object.__setattr__(self, "center", center)

    @property
    def dim(self) -> int:
        return len(self.semi_axes)

    @property
    def axes(self) -> np.ndarray:
        return np.array(self.semi_axes)

    @property
    def is_centered(self) -> bool:
        return not any(self.center)

    @property
    def matrix(self) -> np.ndarray:
        """The diagonal shape matrix ``A = diag(1/a_i^2)``."""
        return np.diag(1.0 / self.axes**2)

    @property
    def volume(self) -> float:
        return unit_ball_volume(self.dim) * float(np.prod(self.axes))

    def translated(self, shift) -> "Ellipsoid":
        return Ellipsoid(self.semi_axes, np.asarray(self.center) + _as_points(shift, self.dim))


def quadric_value(E: Ellipsoid, x) -> np.ndarray:
    """``(x - c)^T A (x - c)``; equals one exactly on the boundary."""
    pts = _as_points(x, E.dim)
    d = pts - np.asarray(E.center)
    return np.sum(d**2 / E.axes**2, axis=-1)


def contains(E: Ellipsoid, x):
    """Closed-set membership, vectorised over leading axes of ``x``."""
    inside = quadric_value(E, x) <= 1.0
    return bool(inside) if np.ndim(inside) == 0 else inside


def scale(E: Ellipsoid, r: float) -> Ellipsoid:
    """The member ``E / r`` of the one-parameter family; shrinks as ``r`` grows."""
    if not r > 0:
        raise ValidationError(f"scale parameter must be positive, got {r}")
    if not E.is_centered:
        raise ValidationError("scale() requires an ellipsoid centred at the origin")
    return Ellipsoid(tuple(a / r for a in E.semi_axes))


def distance_to_boundary(E: Ellipsoid, x) -> np.ndarray:
    """Euclidean distance from exterior points to ``E`` (zero inside).

    Solves ``sum((a_i x_i / (a_i^2 + t))^2) = 1`` for the Lagrange multiplier
    ``t > 0`` by bisection; the left side is strictly decreasing in ``t``.
    """
    pts = _as_points(x, E.dim) - np.asarray(E.center)
    flat = pts.reshape(-1, E.dim)
    a2 = E.axes**2
    out = np.zeros(len(flat))
    ext = np.sum(flat**2 / a2, axis=1) > 1.0
    if np.any(ext):
        y = flat[ext]
        lo = np.zeros(len(y))
        hi = np.max(E.axes) * np.linalg.norm(y, axis=1)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            g = np.sum((E.axes * y / (a2 + mid[:, None])) ** 2, axis=1) - 1.0
            pos = g > 0
            lo = np.where(pos, mid, lo)
            hi = np.where(pos, hi, mid)
            if np.all(hi - lo <= 1e-15 * np.maximum(1.0, hi)):
                break
        t = 0.5 * (lo + hi)
        out[ext] = np.linalg.norm(y * t[:, None] / (a2 + t[:, None]), axis=1)
    return out.reshape(pts.shape[:-1])


def sample_boundary(E: Ellipsoid, count: int, seed: int = 0) -> np.ndarray:
    """Points on ``dE`` obtained by mapping uniform sphere directions."""
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((count, E.dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g * E.axes + np.asarray(E.center)


@dataclass(frozen=True)
class QuadraticBlowdown:
    """Diagonal positive matrix ``Q`` with trace 1/2; the form ``p(x) = x^T Q x``."""

    diag: tuple

    def __post_init__(self):
        q = tuple(float(v) for v in np.ravel(self.diag))
        if not 1 <= len(q) <= MAX_DIM:
            raise ValidationError(f"dimension must be in 1..{MAX_DIM}")
        if not all(np.isfinite(v) and v > 0 for v in q):
            raise ValidationError(f"Q must be positive definite, got diag {q}")
        if abs(sum(q) - 0.5) > TRACE_TOL:
            raise ValidationError(f"trace must be 1/2, got {sum(q)!r}")
        object.__setattr__(self, "diag", q)

    @classmethod
    def normalized(cls, entries, tol: float = 1e-9) -> "QuadraticBlowdown":
        """Accept entries whose sum is 1/2 within ``tol`` and rescale exactly."""
        q = np.asarray(entries, dtype=float)
        if q.ndim != 1 or np.any(~np.isfinite(q)) or np.any(q <= 0):
            raise ValidationError("Q entries must be positive")
        if abs(q.sum() - 0.5) > tol:
            raise ValidationError(f"trace must be 1/2 (got {q.sum():.12g})")
        return cls(tuple(q * (0.5 / q.sum())))

    @property
    def dim(self) -> int:
        return len(self.diag)

    @property
    def q(self) -> np.ndarray:
        return np.array(self.diag)

    def __call__(self, x) -> np.ndarray:
        pts = _as_points(x, self.dim)
        return np.sum(self.q * pts**2, axis=-1)

    def gradient(self, x) -> np.ndarray:
        return 2.0 * self.q * _as_points(x, self.dim)


def diagonalize_blowdown(Q, tol: float = 1e-9):
    """Rotate a symmetric positive definite ``Q`` to diagonal form.

    Returns ``(blowdown, R)`` with ``Q = R diag(q) R^T``; points transform as
    ``x_diag = R^T x``.
    """
    M = np.asarray(Q, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError("Q must be a square matrix")
    if np.max(np.abs(M - M.T)) > tol:
        raise ValidationError("Q must be symmetric")
    w, R = np.linalg.eigh(0.5 * (M + M.T))
    return QuadraticBlowdown.normalized(w, tol=tol), R


# --------------------------------------------------------------------------
# fitting


def _quadratic_design(pts: np.ndarray, linear: bool) -> np.ndarray:
    n = pts.shape[1]
    cols = [pts[:, i] ** 2 for i in range(n)]
    cols += [2.0 * pts[:, i] * pts[:, j] for i in range(n) for j in range(i + 1, n)]
    if linear:
        cols += [pts[:, i] for i in range(n)]
    return np.column_stack(cols)


def _unpack(coef: np.ndarray, n: int, linear: bool):
    A = np.diag(coef[:n])
    k = n
    for i in range(n):
        for j in range(i + 1, n):
            A[i, j] = A[j, i] = coef[k]
            k += 1
    b = coef[k:k + n] if linear else np.zeros(n)
    return A, b


def _solve_fit(pts: np.ndarray, linear: bool):
    D = _quadratic_design(pts, linear)
    sv = np.linalg.svd(D, compute_uv=False)
    if sv[-1] <= 1e-10 * sv[0]:
        raise DegenerateFitError("point set does not determine a quadric (rank-deficient design)")
    coef, *_ = np.linalg.lstsq(D, np.ones(len(pts)), rcond=None)
    resid = float(np.sqrt(np.mean((D @ coef - 1.0) ** 2)))
    return coef, resid


def fit_ellipsoid(points):
    """Least-squares quadric ``x^T A x + b.x = 1`` through ``points``.

    The centred form (``b = 0``) is tried first; the general form is used when
    it explains the data substantially better.  Orientation is not recovered:
    each principal axis is assigned to the coordinate it is closest to.

    Returns:
        ``(Ellipsoid, residual)`` where residual is the RMS algebraic misfit.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2:
        raise DimensionError("points must be an (N, n) array")
    N, n = pts.shape
    if N < n * (n + 3) // 2:
        raise DegenerateFitError(f"need at least {n * (n + 3) // 2} points, got {N}")

    coef_c, res_c = _solve_fit(pts, linear=False)
    try:
        coef_g, res_g = _solve_fit(pts, linear=True)
    except DegenerateFitError:
        coef_g, res_g = None, np.inf
    if coef_g is not None and res_g < 0.5 * res_c:
        A, b = _unpack(coef_g, n, True)
        resid = res_g
    else:
        A, b = _unpack(coef_c, n, False)
        resid = res_c

    w, V = np.linalg.eigh(A)
    if np.any(w <= 0):
        raise DegenerateFitError(f"fitted quadric is not positive definite (eigenvalues {w})")
    c = -0.5 * np.linalg.solve(A, b)
    rhs = 1.0 + c @ A @ c
    if rhs <= 0:
        raise DegenerateFitError("fitted quadric encloses no points")
    lengths = np.sqrt(rhs / w)
    axes = np.empty(n)
    taken = np.zeros(n, dtype=bool)
    for k in np.argsort(-np.max(np.abs(V), axis=0)):
        order = np.argsort(-np.abs(V[:, k]))
        i = next(i for i in order if not taken[i])
        taken[i] = True
        axes[i] = lengths[k]
    return Ellipsoid(tuple(axes), tuple(c)), resid
