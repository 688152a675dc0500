"""Doubly averaged restricted elliptic three-body problem toolkit.

Computes the doubly averaged disturbing function of the spatial restricted
elliptic three-body problem, locates the stable planar equilibria of the
averaged planar problem, and certifies their linear stability against
out-of-plane perturbations via the averaged quadratic-form coefficients,
sweeping the (a, e_J) parameter plane.
"""

from ._version import __version__
from .averaging import (
    AveragedCoefficients,
    QuadratureSpec,
    SeparationGuard,
    SeparationPair,
    averaged_AC,
    averaged_B,
    averaged_R,
    averaged_coefficients,
    direct_average_V3d,
    disturbing_V,
    separation_pair,
)
from .equilibrium import (
    EquilibriumRecord,
    PlanarState,
    dRbar_de,
    find_equilibrium,
    planar_hessian,
)
from .errors import (
    DegenerateError,
    NonConvergedError,
    OrbitCrossingError,
    Secular3bpError,
)
from .geometry import (
    CartesianState,
    DelaunayElements,
    OrbitConfig,
    OsculatingElements,
    PlanetState,
    PoincareState,
    aligned_noncrossing_interval,
    asteroid_plane_position,
    asteroid_position,
    delaunay_from_osculating,
    delaunay_from_poincare,
    orbit_min_separation,
    osculating_from_delaunay,
    planet_position,
    poincare_from_delaunay,
    rotate_to_inertial,
    rotation_matrix,
    solve_kepler,
    wrap_angle,
)
from .stability import (
    ResonancePoint,
    StabilityRecord,
    classify_spatial,
    frequencies,
    linearized_matrix,
    trace_resonance,
)
from .sweep import CellResult, SweepGrid, evaluate_cell, run_sweep

__all__ = [
    "__version__",
    "AveragedCoefficients",
    "CartesianState",
    "CellResult",
    "DegenerateError",
    "DelaunayElements",
    "EquilibriumRecord",
    "NonConvergedError",
    "OrbitConfig",
    "OrbitCrossingError",
    "OsculatingElements",
    "PlanarState",
    "PlanetState",
    "PoincareState",
    "QuadratureSpec",
    "ResonancePoint",
    "Secular3bpError",
    "SeparationGuard",
    "SeparationPair",
    "StabilityRecord",
    "SweepGrid",
    "aligned_noncrossing_interval",
    "asteroid_plane_position",
    "asteroid_position",
    "averaged_AC",
    "averaged_B",
    "averaged_R",
    "averaged_coefficients",
    "classify_spatial",
    "dRbar_de",
    "delaunay_from_osculating",
    "delaunay_from_poincare",
    "direct_average_V3d",
    "disturbing_V",
    "evaluate_cell",
    "find_equilibrium",
    "frequencies",
    "linearized_matrix",
    "orbit_min_separation",
    "osculating_from_delaunay",
    "planar_hessian",
    "planet_position",
    "poincare_from_delaunay",
    "rotate_to_inertial",
    "rotation_matrix",
    "run_sweep",
    "separation_pair",
    "solve_kepler",
    "trace_resonance",
    "wrap_angle",
]
