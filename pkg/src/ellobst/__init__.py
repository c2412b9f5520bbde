"""Ellipsoidal coincidence sets of the global obstacle problem, numerically.

Exact ellipsoid solutions, a PSOR obstacle solver, Newton potentials of
convex bodies, the kernel-weighted centre of a convex body and a verifier
that checks solved fields against the ellipsoid characterisation.
"""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .bodies import ConvexBody, EllipsoidBody, PolytopeBody, SuperellipsoidBody, body_from_description
from .centroid import CentroidResult, gravity_residual, t_epsilon, weighted_centroid
from .errors import (ConvergenceError, DegenerateFitError, DimensionError, EllobstError, MembershipViolation,
                     PreconditionError, QuadratureError, ValidationError)
from .geometry import (Ellipsoid, QuadraticBlowdown, contains, diagonalize_blowdown, distance_to_boundary,
                       fit_ellipsoid, quadric_value, sample_boundary, scale)
from .obstacle import (GridField, GridSpec, SolveParams, coincidence_mask, compare_solutions,
                       complementarity_residual, solve_obstacle)
from .potential import (body_field, body_potential, ellipsoid_potential, ellipsoid_potential_gradient,
                        ellipsoidal_coordinate, kappa_coefficients)
from .solution import (EllipsoidSolution, RescaledSolution, axes_from_blowdown, blowdown_limit_check, evaluate,
                       evaluate_rescaled)
from .verify import (comparison_experiment, find_touching_radius, hopf_check, run_verification,
                     verify_decomposition, verify_ellipsoid_verdict)

__all__ = [name for name in dir() if not name.startswith("_")]
