"""Dual (outer) billiards about strictly convex hypersurfaces in R^(2m).

The ambient space carries the standard linear symplectic structure; the
dual billiard map reflects an exterior point through the tangency point of
the characteristic tangent line it lies on.  The package provides the map,
a variational search for 3-periodic orbits, and the counting experiments
for the orbit-number lower bound 2m and its sharpness.
"""

from .dual_map import (MapConvergenceError, MapResult, NotExteriorError,
                       dual_map, inverse_consistency, is_exterior,
                       symplecticity_defect)
from .orbits import (OrbitSet, OrbitSolution, PolishResult, TangencyTuple,
                     area_gradient, canonicalize, closure_residual,
                     criticality_check, multistart_search, newton_polish,
                     roundtrip_defect, symplectic_area, vertices_from_points)
from .sharpness import (CriticalOrbit, SharpnessReport, critical_orbits,
                        exact_orbit, linearized_seed, sharpness_experiment)
from .surface import (ConvexityError, PerturbationParams, SupportSurface,
                      SurfaceError, load_surface, make_custom, make_ellipsoid,
                      make_perturbed_sphere, make_sphere, make_surface,
                      parse_surface_text)
from .symplectic import cube_root_rotate, j_apply, omega, omega_matrix

__version__ = "0.1.0"

__all__ = [
    "MapConvergenceError", "MapResult", "NotExteriorError", "dual_map",
    "inverse_consistency", "is_exterior", "symplecticity_defect",
    "OrbitSet", "OrbitSolution", "PolishResult", "TangencyTuple",
    "area_gradient", "canonicalize", "closure_residual", "criticality_check",
    "multistart_search", "newton_polish", "roundtrip_defect",
    "symplectic_area", "vertices_from_points",
    "CriticalOrbit", "SharpnessReport", "critical_orbits", "exact_orbit",
    "linearized_seed", "sharpness_experiment",
    "ConvexityError", "PerturbationParams", "SupportSurface", "SurfaceError",
    "load_surface", "make_custom", "make_ellipsoid", "make_perturbed_sphere",
    "make_sphere", "make_surface", "parse_surface_text",
    "cube_root_rotate", "j_apply", "omega", "omega_matrix",
    "__version__",
]
