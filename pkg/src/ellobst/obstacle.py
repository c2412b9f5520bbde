"""Finite-difference obstacle problem on a box, solved by projected SOR.

Discrete complementarity form at interior nodes (Dirichlet data on the box
boundary)::

    u >= 0,   Lap_h u <= 1,   u * (Lap_h u - 1) = 0

with the standard (2n+1)-point Laplacian.  Each PSOR sweep replaces ``u_i``
by ``max(0, u_i + omega * (GS_i - u_i))`` where ``GS_i`` is the Gauss-Seidel
value solving ``Lap_h u = 1`` at node ``i``.
"""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field

import numba as nb
import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import DimensionError, ValidationError

log = logging.getLogger(__name__)

MIN_POINTS = 17
MAX_NODES = 2**27

_threads = os.environ.get("ELLOBST_THREADS")
if _threads:
    nb.set_num_threads(max(1, min(int(_threads), nb.config.NUMBA_NUM_THREADS)))


@dataclass(frozen=True)
class GridSpec:
    """Box ``[-R, R]^n`` with ``m`` (odd) points per axis, so 0 is a node."""

    dim: int
    box_radius: float
    points_per_axis: int

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValidationError(f"grid dimension must be 1, 2 or 3, got {self.dim}")
        if self.points_per_axis < MIN_POINTS or self.points_per_axis % 2 == 0:
            raise ValidationError(f"points_per_axis must be odd and >= {MIN_POINTS}, got {self.points_per_axis}")
        if self.points_per_axis**self.dim > MAX_NODES:
            raise ValidationError("grid exceeds the 2^27 node memory bound")
        if not self.box_radius > 0:
            raise ValidationError("box_radius must be positive")

    @property
    def h(self) -> float:
        return 2.0 * self.box_radius / (self.points_per_axis - 1)

    @property
    def shape(self) -> tuple:
        return (self.points_per_axis,) * self.dim

    @property
    def axis(self) -> np.ndarray:
        return np.linspace(-self.box_radius, self.box_radius, self.points_per_axis)

    def nodes(self) -> np.ndarray:
        """All node coordinates as an ``(m**n, n)`` array in C order."""
        grids = np.meshgrid(*[self.axis] * self.dim, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        for d in range(self.dim):
            idx = [slice(None)] * self.dim
            idx[d] = 0
            mask[tuple(idx)] = True
            idx[d] = -1
            mask[tuple(idx)] = True
        return mask


@dataclass(frozen=True)
class SolveParams:
    omega: float = 1.8
    tol: float | None = None  # default 1e-10 * max |boundary data|
    max_sweeps: int = 100_000
    ordering: str = "lexicographic"  # or "red-black"

    def __post_init__(self):
        if not 1.0 < self.omega < 2.0:
            raise ValidationError("omega must lie in (1, 2)")
        if self.ordering not in ("lexicographic", "red-black"):
            raise ValidationError(f"unknown ordering {self.ordering!r}")


@dataclass
class GridField:
    spec: GridSpec
    values: np.ndarray
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.spec.shape:
            raise DimensionError(f"values shape {self.values.shape} does not match grid {self.spec.shape}")

    @property
    def converged(self) -> bool:
        return bool(self.info.get("converged", True))

    def interpolator(self):
        """Multilinear interpolant accepting ``(..., n)`` point arrays."""
        axes = (self.spec.axis,) * self.spec.dim
        return RegularGridInterpolator(axes, self.values, method="linear", bounds_error=True)


# --------------------------------------------------------------------------
# kernels

_jit = {"nogil": True, "cache": True}


@nb.njit(**_jit)
def _sweep(u, dims, offsets, h2, omega, color):
    """One PSOR pass over interior nodes; ``color`` -1 means every node."""
    n0, n1, n2 = dims
    lo0 = 1 if n0 > 1 else 0
    lo1 = 1 if n1 > 1 else 0
    c_old = 1.0 - omega
    c_nb = omega / offsets.size
    c_0 = -c_nb * h2
    maxdu = 0.0
    for i in range(lo0, n0 - lo0):
        for j in range(lo1, n1 - lo1):
            if color < 0:
                k0, step = 1, 1
            else:
                k0, step = 1 + (i + j + 1 + color) % 2, 2
            base = (i * n1 + j) * n2
            for k in range(k0, n2 - 1, step):
                p = base + k
                # everything except u[p-1] is off the Gauss-Seidel dependency chain
                far = u[p + 1]
                for o in offsets:
                    if o != 1 and o != -1:
                        far += u[p + o]
                old = u[p]
                new = c_nb * (far + u[p - 1]) + (c_old * old + c_0)
                if new < 0.0:
                    new = 0.0
                du = abs(new - old)
                if du > maxdu:
                    maxdu = du
                u[p] = new
    return maxdu


@nb.njit(parallel=True, **_jit)
def _sweep_parallel(u, dims, offsets, h2, omega, color, rowmax):
    """Same update for one colour; rows are independent, so they run in parallel."""
    n0, n1, n2 = dims
    lo0 = 1 if n0 > 1 else 0
    lo1 = 1 if n1 > 1 else 0
    c_old = 1.0 - omega
    c_nb = omega / offsets.size
    c_0 = -c_nb * h2
    for i in nb.prange(lo0, n0 - lo0):
        m = 0.0
        for j in range(lo1, n1 - lo1):
            base = (i * n1 + j) * n2
            for k in range(1 + (i + j + 1 + color) % 2, n2 - 1, 2):
                p = base + k
                s = u[p + 1] + u[p - 1]
                for o in offsets:
                    if o != 1 and o != -1:
                        s += u[p + o]
                old = u[p]
                new = c_nb * s + (c_old * old + c_0)
                if new < 0.0:
                    new = 0.0
                du = abs(new - old)
                if du > m:
                    m = du
                u[p] = new
        rowmax[i] = m
    return rowmax.max()


@nb.njit(**_jit)
def _sweep3(u, m, h2, omega, color):
    """3-D specialisation of :func:`_sweep` with explicit strides."""
    s1 = m
    s0 = m * m
    c_old = 1.0 - omega
    c_nb = omega / 6.0
    c_0 = -c_nb * h2
    maxdu = 0.0
    for i in range(1, m - 1):
        for j in range(1, m - 1):
            if color < 0:
                k0, step = 1, 1
            else:
                k0, step = 1 + (i + j + 1 + color) % 2, 2
            base = (i * m + j) * m
            for k in range(k0, m - 1, step):
                p = base + k
                far = (u[p + 1] + u[p + s1]) + (u[p - s1] + u[p + s0]) + u[p - s0]
                old = u[p]
                new = c_nb * (far + u[p - 1]) + (c_old * old + c_0)
                if new < 0.0:
                    new = 0.0
                du = abs(new - old)
                if du > maxdu:
                    maxdu = du
                u[p] = new
    return maxdu


@nb.njit(parallel=True, **_jit)
def _sweep3_parallel(u, m, h2, omega, color, rowmax):
    s1 = m
    s0 = m * m
    c_old = 1.0 - omega
    c_nb = omega / 6.0
    c_0 = -c_nb * h2
    for i in nb.prange(1, m - 1):
        mx = 0.0
        for j in range(1, m - 1):
            base = (i * m + j) * m
            for k in range(1 + (i + j + 1 + color) % 2, m - 1, 2):
                p = base + k
                s = (u[p + 1] + u[p + s1]) + (u[p - s1] + u[p + s0]) + (u[p - s0] + u[p - 1])
                old = u[p]
                new = c_nb * s + (c_old * old + c_0)
                if new < 0.0:
                    new = 0.0
                du = abs(new - old)
                if du > mx:
                    mx = du
                u[p] = new
        rowmax[i] = mx
    return rowmax.max()


def _layout(spec: GridSpec):
    m = spec.points_per_axis
    dims = np.array((1,) * (3 - spec.dim) + (m,) * spec.dim, dtype=np.int64)
    strides = [m ** (spec.dim - 1 - d) for d in range(spec.dim)]
    offsets = np.array([s for st in strides for s in (st, -st)], dtype=np.int64)
    return dims, offsets


def gs_correction(field: GridField) -> np.ndarray:
    """``h^2 (Lap_h u - 1) / (2n)`` at interior nodes (zero on the boundary)."""
    u = field.values
    n = field.spec.dim
    h2 = field.spec.h**2
    out = np.zeros_like(u)
    inner = tuple(slice(1, -1) for _ in range(n))
    s = np.zeros(tuple(m - 2 for m in u.shape))
    for d in range(n):
        lo = list(inner)
        hi = list(inner)
        lo[d] = slice(0, -2)
        hi[d] = slice(2, None)
        s += u[tuple(lo)] + u[tuple(hi)]
    out[inner] = (s - h2) / (2 * n) - u[inner]
    return out


def discrete_laplacian(field: GridField) -> np.ndarray:
    """``Lap_h u`` at interior nodes (NaN on the boundary)."""
    n = field.spec.dim
    lap = gs_correction(field) * (2 * n) / field.spec.h**2 + 1.0
    lap[field.spec.boundary_mask()] = np.nan
    return lap


@dataclass
class ComplementarityResidual:
    max_neg_u: float
    max_excess_laplacian: float
    max_product: float

    def max(self) -> float:
        return max(self.max_neg_u, self.max_excess_laplacian, self.max_product)

    def as_tuple(self):
        return (self.max_neg_u, self.max_excess_laplacian, self.max_product)


def complementarity_residual(field: GridField) -> ComplementarityResidual:
    """Maxima over interior nodes of ``(-u)+``, ``(Lap_h u - 1)+`` and ``|u (Lap_h u - 1)|``.

    The Laplacian excess is reported in the diagonally scaled form
    ``h^2 (Lap_h u - 1) / (2n)``, i.e. in the same units as a nodal update, so
    that all three numbers compare directly with the solver tolerance.
    Non-finite values propagate as ``inf``.
    """
    interior = ~field.spec.boundary_mask()
    u = field.values[interior]
    g = gs_correction(field)[interior]
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(g))):
        return ComplementarityResidual(np.inf, np.inf, np.inf)
    return ComplementarityResidual(float(np.max(np.maximum(-u, 0.0), initial=0.0)),
                                   float(np.max(np.maximum(g, 0.0), initial=0.0)),
                                   float(np.max(np.abs(u * g), initial=0.0)))


def boundary_values(spec: GridSpec, boundary) -> np.ndarray:
    """Sample ``boundary`` (callable on ``(N, n)`` points, or scalar) on the box boundary."""
    values = np.zeros(spec.shape)
    bmask = spec.boundary_mask()
    if callable(boundary):
        pts = spec.nodes()[bmask.ravel()]
        values[bmask] = np.asarray(boundary(pts), dtype=float)
    else:
        values[bmask] = float(boundary)
    return values


def make_sweeper(spec: GridSpec, omega: float, ordering: str = "lexicographic"):
    """One in-place PSOR sweep over a C-contiguous field; returns the largest update."""
    dims, offsets = _layout(spec)
    h2 = spec.h**2
    rowmax = np.zeros(dims[0])
    m = spec.points_per_axis
    if ordering == "lexicographic":
        if spec.dim == 3:
            def sweep(v):
                return _sweep3(v.ravel(), m, h2, omega, -1)
        else:
            def sweep(v):
                return _sweep(v.ravel(), dims, offsets, h2, omega, -1)
    elif ordering == "red-black":
        if spec.dim == 3:
            def sweep(v):
                v = v.ravel()
                return max(_sweep3_parallel(v, m, h2, omega, 0, rowmax),
                           _sweep3_parallel(v, m, h2, omega, 1, rowmax))
        else:
            def sweep(v):
                v = v.ravel()
                return max(_sweep_parallel(v, dims, offsets, h2, omega, 0, rowmax),
                           _sweep_parallel(v, dims, offsets, h2, omega, 1, rowmax))
    else:
        raise ValidationError(f"unknown ordering {ordering!r}")
    return sweep


def solve_obstacle(spec: GridSpec, boundary, params: SolveParams | None = None, initial=None) -> GridField:
    """Projected SOR for the discrete obstacle problem.

    Stops when the largest nodal update is below ``tol`` and every
    complementarity residual is below ``100 tol``.  If ``max_sweeps`` is hit
    first the field is returned with ``info["converged"] = False``.
    """
    params = params or SolveParams()
    u = boundary_values(spec, boundary)
    bmask = spec.boundary_mask()
    if np.any(u[bmask] < 0):
        raise ValidationError("boundary data must be nonnegative")
    if initial is not None:
        u[~bmask] = np.maximum(np.asarray(initial, dtype=float)[~bmask], 0.0)
    scale = float(np.max(np.abs(u[bmask]))) or 1.0
    tol = params.tol if params.tol is not None else 1e-10 * scale

    sweep = make_sweeper(spec, params.omega, params.ordering)
    uf = u.ravel()

    converged = False
    sweeps = 0
    maxdu = np.inf
    field = GridField(spec, u)
    while sweeps < params.max_sweeps:
        maxdu = sweep(uf)
        sweeps += 1
        if maxdu <= tol:
            if complementarity_residual(field).max() < 100 * tol:
                converged = True
                break
    if not converged:
        log.warning("PSOR did not converge in %d sweeps (last update %.3g)", sweeps, maxdu)
    field.info = {"converged": converged, "sweeps": sweeps, "tol": tol, "max_update": float(maxdu),
                  "omega": params.omega, "ordering": params.ordering}
    return field


def coincidence_mask(field: GridField) -> np.ndarray:
    """Interior nodes with ``u < h^2/4``; ``u`` grows like ``dist^2/2`` off the set."""
    mask = field.values < field.spec.h**2 / 4.0
    mask &= ~field.spec.boundary_mask()
    return mask


@dataclass
class OrderingReport:
    min_difference: float
    tol: float
    ordered: bool


def compare_solutions(a: GridField, b: GridField, tol: float | None = None) -> OrderingReport:
    """Discrete comparison principle: ``a >= b`` on the boundary should give ``a >= b`` everywhere."""
    if a.spec != b.spec:
        raise ValidationError("fields live on different grids")
    tol = tol if tol is not None else max(a.info.get("tol", 0.0), b.info.get("tol", 0.0))
    diff = float(np.min(a.values - b.values))
    return OrderingReport(diff, tol, diff >= -10.0 * tol)


def sample_field(spec: GridSpec, func) -> GridField:
    """Evaluate an exact solution at every node."""
    return GridField(spec, np.asarray(func(spec.nodes()), dtype=float).reshape(spec.shape), {"exact": True})
