"""Double-averaging quadrature engine.

Computes the doubly averaged disturbing function Rbar and the averaged
quadratic-form coefficients Abar, Bbar, Cbar that govern out-of-plane
linear stability, plus a direct 3-D average used as an independent oracle.

The integrands are analytic and 2*pi-periodic in both eccentric anomalies
for non-crossing orbit pairs, so an equally spaced (midpoint) tensor grid
converges geometrically; accuracy is controlled by node doubling until two
consecutive levels agree to the requested relative tolerance.

For the aligned planar configuration (g = 0, i = 0) the reflection symmetry
of both ellipses about the x axis folds the full [0, 2*pi)^2 averages onto
the quarter domain [0, pi]^2:

    Rbar =  1/(2 pi^2 )   * II (r1 + r2)  /(r1 r2)     * w dE dEJ
    Abar = -1/(4 pi^2 G)  * II (r2^3-r1^3)/(r1^3 r2^3) * y yJ w dE dEJ
    Cbar = -1/(4 pi^2 G)  * II (r2^3+r1^3)/(r1^3 r2^3) * x xJ w dE dEJ

with r1, r2 the distances to the planet and to its mirror image,
w = (1 - e cos E)(1 - eJ cos EJ), and G = sqrt((1-mu) a (1-e^2)).  The same
symmetry makes the double average of the cross coefficient B vanish
identically; ``averaged_B`` evaluates it over the full domain as a
numerical invariant.  On the quarter domain (r2^3 - r1^3) y yJ >= 0
pointwise, which forces Abar < 0; this is asserted per evaluation.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .errors import NonConvergedError, OrbitCrossingError
from .geometry import (
    OrbitConfig,
    PoincareState,
    aligned_separation,
    delaunay_from_poincare,
    rotation_matrix,
)

__all__ = [
    "DEFAULT_SEPARATION_THRESHOLD",
    "QuadratureSpec",
    "AveragedCoefficients",
    "SeparationPair",
    "SeparationGuard",
    "disturbing_V",
    "separation_pair",
    "averaged_R",
    "averaged_AC",
    "averaged_B",
    "averaged_coefficients",
    "direct_average_V3d",
]

# Below this inter-orbit distance a configuration is treated as crossing:
# the integrands scale like 1/r^3 and quadrature ceases to be trustworthy.
DEFAULT_SEPARATION_THRESHOLD = 1e-3

# Tiny floor that keeps the relative convergence test well-defined for
# exactly-zero values.
_SCALE_FLOOR = 1e-300


@dataclass(frozen=True)
class QuadratureSpec:
    """Tensor-grid quadrature control.

    n_ast/n_pl are the initial node counts in the asteroid and planet
    anomalies; both are doubled together until two consecutive levels agree
    to relative tolerance ``tol`` (reported as the convergence estimate) or
    either count would exceed ``max_n``.
    """

    n_ast: int = 64
    n_pl: int = 64
    tol: float = 1e-10
    max_n: int = 4096

    def __post_init__(self):
        if self.n_ast < 8 or self.n_pl < 8:
            raise ValueError("need at least 8 quadrature nodes per anomaly")
        if not (self.tol > 0.0):
            raise ValueError(f"tolerance must be positive, got {self.tol}")
        if self.max_n < max(self.n_ast, self.n_pl):
            raise ValueError("max_n must be at least the initial node count")


@dataclass(frozen=True)
class AveragedCoefficients:
    """Doubly averaged outputs at one (a, e, eJ) with convergence estimates."""

    Rbar: float
    Abar: float
    Bbar: float
    Cbar: float
    err: dict
    crossing_flag: bool = False


@dataclass(frozen=True)
class SeparationPair:
    """Distances to the planet (r1) and to its x-axis mirror image (r2)."""

    r1: float
    r2: float


def separation_pair(x, y, xJ, yJ) -> SeparationPair:
    r1 = math.hypot(x - xJ, y - yJ)
    r2 = math.hypot(x - xJ, y + yJ)
    return SeparationPair(r1=r1, r2=r2)


def disturbing_V(x, y, z, xJ, yJ):
    """Pointwise disturbing function 1 / |r - rJ| (planet in the z=0 plane)."""
    rsq = (x - xJ) ** 2 + (y - yJ) ** 2 + z * z
    if rsq == 0.0:
        raise ValueError("asteroid and planet positions coincide")
    return 1.0 / math.sqrt(rsq)


class SeparationGuard:
    """Cached orbit-separation checks for one (a, eJ) parameter cell.

    Exact separations come from the support-function form
    (:func:`aligned_separation`, which agrees with the sampling-based
    :func:`orbit_min_separation` wherever the separation is positive but is
    far cheaper); between cached eccentricities a Lipschitz bound (the
    aligned curves move at most ~4a per unit of e) certifies safety without
    re-evaluating, keeping repeated guard checks cheap inside derivative
    stencils and root refinement.
    """

    def __init__(self, cfg: OrbitConfig, threshold=DEFAULT_SEPARATION_THRESHOLD):
        self.cfg = cfg
        self.threshold = threshold
        self._cache = {}
        self._lip = 4.0 * cfg.a

    def min_separation(self, e):
        sep = self._cache.get(e)
        if sep is None:
            sep = aligned_separation(self.cfg.a, e, self.cfg.e_J)
            self._cache[e] = sep
        return sep

    def separation_lower_bound(self, e):
        best = -math.inf
        for e0, sep0 in self._cache.items():
            best = max(best, sep0 - self._lip * abs(e - e0))
        return best

    def check(self, e):
        """Raise OrbitCrossingError if the configuration is within threshold."""
        if self.separation_lower_bound(e) >= self.threshold:
            return
        sep = self.min_separation(e)
        if sep < self.threshold:
            raise OrbitCrossingError(
                f"orbits closer than {self.threshold:g} at "
                f"a={self.cfg.a:g}, e={e:g}, e_J={self.cfg.e_J:g} "
                f"(separation {sep:.3e})",
                separation=sep,
            )


def _ensure_guard(cfg, guard):
    if guard is None:
        return SeparationGuard(cfg)
    return guard


def _doubling(eval_at, quad: QuadratureSpec, floors=None):
    """Run node doubling until consecutive levels agree; returns level data.

    ``eval_at(n1, n2)`` must return a tuple of floats.  Component i is
    converged when its level-to-level change is at most
    tol * max(|value_i|, floors_i); a floor of ~1 turns the test absolute
    at ``tol``, which is what identically-zero quantities (Bbar) need.
    """
    n1, n2 = quad.n_ast, quad.n_pl
    prev = np.asarray(eval_at(n1, n2), dtype=float)
    if floors is None:
        floors = np.full(prev.shape, _SCALE_FLOOR)
    else:
        floors = np.asarray(floors, dtype=float)
    while True:
        n1n, n2n = 2 * n1, 2 * n2
        if max(n1n, n2n) > quad.max_n:
            raise NonConvergedError(
                f"quadrature not converged at node cap {quad.max_n}",
                last_error=float(np.max(np.abs(prev))),
                nodes=max(n1, n2),
            )
        cur = np.asarray(eval_at(n1n, n2n), dtype=float)
        err = np.abs(cur - prev)
        n1, n2 = n1n, n2n
        if np.all(err <= quad.tol * np.maximum(np.abs(cur), floors)):
            return cur, err, (n1, n2)
        prev = cur


def _quarter_eval(a, e, eJ, n1, n2):
    rbar, a_mean, c_mean, min_factor = kernels.quarter_sums(a, e, eJ, n1, n2)
    if min_factor < 0.0:
        raise RuntimeError(
            "internal error: the Abar kernel factor (r2^3 - r1^3) y yJ "
            f"went negative ({min_factor:.3e}) on the quarter grid"
        )
    return rbar, a_mean, c_mean


def averaged_R(cfg: OrbitConfig, e, g, quad: QuadratureSpec, guard=None,
               nodes=None):
    """Doubly averaged disturbing function Rbar at eccentricity e, angle g.

    The planar secular Hamiltonian is -mu * Rbar.  For g = 0 the folded
    quarter-domain form is used (after an exact separation check); for
    general g the full-domain average of the rotated configuration is
    evaluated, guarded by the smallest sampled inter-orbit distance.

    Args:
        cfg: Problem parameters.
        e: Asteroid eccentricity in [0, 1).
        g: Argument-of-periapsis angle of the asteroid, radians.
        quad: Quadrature control.
        guard: Optional shared SeparationGuard (g = 0 path only).
        nodes: Fixed node count; bypasses doubling (err reported as nan).

    Returns:
        (Rbar, err) with err the node-doubling convergence estimate.

    Raises:
        OrbitCrossingError: Orbits closer than the separation threshold.
        NonConvergedError: Node cap reached before the tolerance.
    """
    if not (0.0 <= e < 1.0):
        raise ValueError(f"eccentricity must be in [0, 1), got {e}")
    g = float(np.mod(g, 2.0 * np.pi))
    threshold = guard.threshold if guard is not None else DEFAULT_SEPARATION_THRESHOLD
    if g == 0.0:
        _ensure_guard(cfg, guard).check(e)
        if nodes is not None:
            rbar, _, _ = _quarter_eval(cfg.a, e, cfg.e_J, nodes, nodes)
            return rbar, math.nan
        vals, errs, _ = _doubling(
            lambda n1, n2: _quarter_eval(cfg.a, e, cfg.e_J, n1, n2), quad
        )
        return float(vals[0]), float(errs[0])

    cg, sg = math.cos(g), math.sin(g)

    def eval_rot(n1, n2):
        rbar, r1sq_min = kernels.rbar_rotated_mean(cfg.a, e, cfg.e_J, cg, sg, n1, n2)
        if r1sq_min < threshold * threshold:
            raise OrbitCrossingError(
                f"sampled inter-orbit distance below {threshold:g} at "
                f"a={cfg.a:g}, e={e:g}, g={g:g}, e_J={cfg.e_J:g}",
                separation=math.sqrt(r1sq_min),
            )
        return (rbar,)

    if nodes is not None:
        return eval_rot(nodes, nodes)[0], math.nan
    vals, errs, _ = _doubling(eval_rot, quad)
    return float(vals[0]), float(errs[0])


def averaged_coefficients(cfg: OrbitConfig, e, quad: QuadratureSpec, guard=None,
                          include_B=True, nodes=None) -> AveragedCoefficients:
    """All averaged coefficients at the aligned configuration (g = 0, i = 0).

    Rbar, Abar, Cbar come from one quarter-domain evaluation; Bbar (whose
    exact value is 0 by symmetry) is evaluated over the full domain at the
    same resolution when ``include_B`` is set.

    Raises:
        OrbitCrossingError / NonConvergedError as in :func:`averaged_R`.
        RuntimeError: If the computed Abar fails to be negative, which the
            pointwise-positive quarter-domain kernel makes impossible short
            of an internal defect (diagnostic, never silently corrected).
    """
    if not (0.0 <= e < 1.0):
        raise ValueError(f"eccentricity must be in [0, 1), got {e}")
    _ensure_guard(cfg, guard).check(e)
    G = cfg.G_of(e)

    def eval_all(n1, n2):
        rbar, a_mean, c_mean = _quarter_eval(cfg.a, e, cfg.e_J, n1, n2)
        if include_B:
            b_mean = kernels.bbar_mean(cfg.a, e, cfg.e_J, n1, n2)
            return rbar, a_mean, c_mean, b_mean
        return rbar, a_mean, c_mean

    # Bbar is identically zero: converge it absolutely at tol, on the
    # natural O(1) scale of the disturbing function.
    floors = (_SCALE_FLOOR, _SCALE_FLOOR, _SCALE_FLOOR, 1.0) if include_B \
        else (_SCALE_FLOOR, _SCALE_FLOOR, _SCALE_FLOOR)
    if nodes is not None:
        vals = np.asarray(eval_all(nodes, nodes), dtype=float)
        errs = np.full(vals.shape, math.nan)
    else:
        vals, errs, _ = _doubling(eval_all, quad, floors=floors)
    rbar, a_mean, c_mean = vals[0], vals[1], vals[2]
    abar = -a_mean / G
    cbar = -c_mean / G
    bbar = -vals[3] / (4.0 * G) if include_B else math.nan
    err = {
        "Rbar": float(errs[0]),
        "Abar": float(errs[1] / G),
        "Cbar": float(errs[2] / G),
        "Bbar": float(errs[3] / (4.0 * G)) if include_B else math.nan,
    }
    if not abar < 0.0:
        raise RuntimeError(
            f"internal error: Abar = {abar} is not negative for a "
            "non-crossing configuration"
        )
    return AveragedCoefficients(Rbar=float(rbar), Abar=float(abar),
                                Bbar=float(bbar), Cbar=float(cbar), err=err)


def averaged_AC(cfg: OrbitConfig, e, quad: QuadratureSpec, guard=None):
    """Averaged quadratic-form coefficients (Abar, Cbar) and their errors."""
    coeffs = averaged_coefficients(cfg, e, quad, guard=guard, include_B=False)
    return coeffs.Abar, coeffs.Cbar, {"Abar": coeffs.err["Abar"],
                                      "Cbar": coeffs.err["Cbar"]}


def averaged_B(cfg: OrbitConfig, e, quad: QuadratureSpec, guard=None):
    """Full-domain double average of the cross coefficient B (0 by symmetry).

    Returned as a numerical invariant: the value must sit below the
    quadrature tolerance, and this is asserted by callers rather than here.
    """
    if not (0.0 <= e < 1.0):
        raise ValueError(f"eccentricity must be in [0, 1), got {e}")
    _ensure_guard(cfg, guard).check(e)
    G = cfg.G_of(e)
    vals, errs, _ = _doubling(
        lambda n1, n2: (kernels.bbar_mean(cfg.a, e, cfg.e_J, n1, n2),), quad,
        floors=(1.0,),
    )
    return float(-vals[0] / (4.0 * G)), float(errs[0] / (4.0 * G))


def direct_average_V3d(cfg: OrbitConfig, state: PoincareState,
                       quad: QuadratureSpec, guard=None, nodes=None):
    """Directly averaged 3-D disturbing function at a Poincare phase point.

    Evaluates the full spatial geometry (no small-inclination expansion):
    the Poincare variables are inverted to Delaunay elements, the orbital
    plane is rotated to the inertial frame, and V = 1/|r - rJ| is averaged
    over both mean anomalies.  Finite-difference second derivatives of this
    function in (p3, q3) at the planar subspace reproduce (2 Abar, 2 Cbar)
    and a vanishing cross term, which is the package's independent oracle
    for the quadratic-form coefficients.

    Args:
        cfg: Problem parameters; state.p1 must equal sqrt((1-mu) a).
        state: Poincare phase point.
        quad: Quadrature control.
        guard: Optional SeparationGuard supplying the crossing threshold.
        nodes: Fixed node count; bypasses doubling (err reported as nan).

    Returns:
        (Vbar, err).
    """
    L = cfg.L
    if abs(state.p1 - L) > 1e-9 * L:
        raise ValueError(
            f"state.p1 = {state.p1} inconsistent with sqrt((1-mu) a) = {L}"
        )
    d, _flags = delaunay_from_poincare(state)
    ratio = min(d.G / d.L, 1.0)
    e = math.sqrt(max(0.0, 1.0 - ratio * ratio))
    if not (0.0 <= e < 1.0):
        raise ValueError(f"implied eccentricity {e} outside [0, 1)")
    inc = math.acos(max(-1.0, min(1.0, d.H / d.G)))
    m = rotation_matrix(d.g, inc, d.h)
    threshold = guard.threshold if guard is not None else DEFAULT_SEPARATION_THRESHOLD

    def eval_v(n1, n2):
        vbar, rsq_min = kernels.vbar_mean(
            cfg.a, e, cfg.e_J,
            m[0, 0], m[0, 1], m[1, 0], m[1, 1], m[2, 0], m[2, 1],
            n1, n2,
        )
        if rsq_min < threshold * threshold:
            raise OrbitCrossingError(
                f"sampled 3-D separation below {threshold:g} at "
                f"a={cfg.a:g}, e={e:g}, e_J={cfg.e_J:g}",
                separation=math.sqrt(rsq_min),
            )
        return (vbar,)

    if nodes is not None:
        return eval_v(nodes, nodes)[0], math.nan
    vals, errs, _ = _doubling(eval_v, quad)
    return float(vals[0]), float(errs[0])


def refine_tolerance(quad: QuadratureSpec, factor=10.0) -> QuadratureSpec:
    """A copy of ``quad`` with the tolerance tightened by ``factor``."""
    return replace(quad, tol=quad.tol / factor)
