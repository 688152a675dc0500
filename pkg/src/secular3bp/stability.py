"""Spatial linear stability at planar equilibria and resonance tracing.

At an aligned planar equilibrium the out-of-plane dynamics linearizes to
the one-degree-of-freedom Hamiltonian -mu (Abar p3^2 + Cbar q3^2); both
averaged coefficients negative makes that quadratic form negative definite
and the equilibrium linearly stable against spatial perturbations.  Sign
verdicts are only issued when the margin exceeds three times the reported
quadrature error.

Frequencies follow from the standard quadratic-Hamiltonian normal form:
for H = -mu Rbar restricted to (p2, q2) the libration frequency is
mu sqrt(det Hess(Rbar)), and for -mu (Abar p3^2 + Cbar q3^2) the
out-of-plane frequency is 2 mu sqrt(Abar Cbar).  Both are reported divided
by mu, making the ratio omega_z / omega_plane a mu-free diagnostic whose
level sets (ratio = 2 and ratio = 1/2) are the candidate resonance curves
traced over the (a, e_J) parameter plane.
"""

import math
from dataclasses import dataclass

import numpy as np

from .averaging import (
    QuadratureSpec,
    SeparationGuard,
    averaged_coefficients,
    refine_tolerance,
)
from .equilibrium import (
    POSITIVE_DEFINITE,
    STATUS_FOUND,
    STATUS_MULTIPLE_ROOTS,
    EquilibriumRecord,
    find_equilibrium,
)
from .errors import DegenerateError, Secular3bpError
from .geometry import OrbitConfig

__all__ = [
    "LINEARLY_STABLE",
    "UNSTABLE",
    "INCONCLUSIVE",
    "StabilityRecord",
    "ResonancePoint",
    "sign_verdict",
    "classify_spatial",
    "frequencies",
    "linearized_matrix",
    "point_ratio",
    "trace_resonance",
]

LINEARLY_STABLE = "LINEARLY_STABLE"
UNSTABLE = "UNSTABLE"
INCONCLUSIVE = "INCONCLUSIVE"

# A sign is certified only when |coefficient| > MARGIN_FACTOR * error.
MARGIN_FACTOR = 3.0


@dataclass(frozen=True, eq=False)
class StabilityRecord:
    """Spatial stability classification at one planar equilibrium.

    Frequencies are stored divided by mu (they both carry the common factor
    mu, so the ratio is mu-independent).
    """

    cfg: OrbitConfig
    e_star: float
    Abar: float
    Cbar: float
    spatial_verdict: str
    omega_plane: float
    omega_z: float
    ratio: float
    coefficients: object = None  # full AveragedCoefficients, for reporting


@dataclass(frozen=True)
class ResonancePoint:
    a: float
    e_J: float
    ratio: float


def _effective_error(value, err):
    floor = 4.0 * np.finfo(float).eps * abs(value)
    if not math.isfinite(err):
        return floor
    return max(err, floor)


def sign_verdict(abar, cbar, err_a, err_c, margin=MARGIN_FACTOR):
    """Classify stability from coefficient signs with error margins."""
    err_a = _effective_error(abar, err_a)
    err_c = _effective_error(cbar, err_c)
    if abar < -margin * err_a and cbar < -margin * err_c:
        return LINEARLY_STABLE
    if abar > margin * err_a or cbar > margin * err_c:
        return UNSTABLE
    return INCONCLUSIVE


def frequencies(cfg: OrbitConfig, eq: EquilibriumRecord, Abar, Cbar):
    """Linearized frequencies at a stable equilibrium, divided by mu.

    omega_plane = sqrt(det Hess Rbar) in canonical (p2, q2);
    omega_z = 2 sqrt(Abar Cbar).  Multiply by mu for physical rates.

    Raises:
        DegenerateError: If det Hess <= 0 or Abar * Cbar <= 0.
    """
    del cfg
    if eq.hessian is None:
        raise DegenerateError("equilibrium record carries no planar Hessian")
    det = float(np.linalg.det(eq.hessian))
    if det <= 0.0:
        raise DegenerateError(f"planar Hessian determinant {det} is not positive")
    prod = Abar * Cbar
    if prod <= 0.0:
        raise DegenerateError(f"Abar * Cbar = {prod} is not positive")
    omega_plane = math.sqrt(det)
    omega_z = 2.0 * math.sqrt(prod)
    return omega_plane, omega_z, omega_z / omega_plane


def linearized_matrix(hessian, Abar, Cbar, mu=1.0):
    """4x4 linearization of the averaged system at an equilibrium.

    State ordering (p2, q2, p3, q3) for the Hamiltonian
    H = -mu (Rbar + Abar p3^2 + Cbar q3^2); the planar and spatial blocks
    decouple exactly at the equilibrium.  The spectrum of the returned
    matrix is {+-i mu omega_plane, +-i mu omega_z}.
    """
    S = np.zeros((4, 4))
    S[:2, :2] = -mu * np.asarray(hessian)
    S[2, 2] = -mu * 2.0 * Abar
    S[3, 3] = -mu * 2.0 * Cbar
    T = np.array([
        [0.0, -1.0, 0.0, 0.0],
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, -1.0],
        [0.0, 0.0, 1.0, 0.0],
    ])
    return T @ S


def classify_spatial(cfg: OrbitConfig, eq: EquilibriumRecord,
                     quad: QuadratureSpec, guard=None) -> StabilityRecord:
    """Spatial linear-stability verdict at a located planar equilibrium.

    Evaluates (Abar, Cbar) at (a, e*, e_J) and requires the sign margins to
    exceed three times the quadrature error; a borderline result triggers
    one automatic refinement at tol/10 before settling on INCONCLUSIVE.
    Frequencies are attached when the verdict is LINEARLY_STABLE and the
    planar Hessian is positive definite.

    Args:
        cfg: Problem parameters.
        eq: Equilibrium record with status FOUND (or MULTIPLE_ROOTS, in
            which case the selected stable root is classified).
        quad: Quadrature control.
        guard: Optional shared SeparationGuard.

    Returns:
        StabilityRecord.
    """
    if eq.status not in (STATUS_FOUND, STATUS_MULTIPLE_ROOTS):
        raise ValueError(f"cannot classify equilibrium with status {eq.status}")
    if guard is None:
        guard = SeparationGuard(cfg)

    coeffs = averaged_coefficients(cfg, eq.e_star, quad, guard=guard)
    verdict = sign_verdict(coeffs.Abar, coeffs.Cbar,
                           coeffs.err["Abar"], coeffs.err["Cbar"])
    if verdict == INCONCLUSIVE:
        coeffs = averaged_coefficients(cfg, eq.e_star, refine_tolerance(quad),
                                       guard=guard)
        verdict = sign_verdict(coeffs.Abar, coeffs.Cbar,
                               coeffs.err["Abar"], coeffs.err["Cbar"])

    omega_plane = omega_z = ratio = math.nan
    if verdict == LINEARLY_STABLE and eq.hessian_definite == POSITIVE_DEFINITE:
        try:
            omega_plane, omega_z, ratio = frequencies(cfg, eq, coeffs.Abar,
                                                      coeffs.Cbar)
        except DegenerateError:
            pass
    return StabilityRecord(
        cfg=cfg, e_star=eq.e_star, Abar=coeffs.Abar, Cbar=coeffs.Cbar,
        spatial_verdict=verdict, omega_plane=omega_plane, omega_z=omega_z,
        ratio=ratio, coefficients=coeffs,
    )


def point_ratio(a, e_J, mu, quad: QuadratureSpec):
    """Frequency ratio omega_z / omega_plane at one parameter point.

    Runs the full equilibrium -> classification -> frequencies pipeline;
    returns None when any stage fails (crossing, no root, non-convergence,
    inconclusive signs).
    """
    try:
        cfg = OrbitConfig(a=a, e_J=e_J, mu=mu)
        guard = SeparationGuard(cfg)
        eq = find_equilibrium(cfg, quad, guard=guard)
        if eq.status not in (STATUS_FOUND, STATUS_MULTIPLE_ROOTS):
            return None
        rec = classify_spatial(cfg, eq, quad, guard=guard)
    except (Secular3bpError, ValueError):
        return None
    if not math.isfinite(rec.ratio):
        return None
    return rec.ratio


def trace_resonance(grid, k=2.0, evaluate_ratio=None, param_tol=1e-4):
    """Locate the ratio = k level set on a swept parameter grid.

    Scans grid edges for sign changes of (ratio - k) between adjacent cells
    that both carry finite ratios, then bisects each edge in parameter space
    (re-running the full pipeline at interior points) down to ``param_tol``.
    An empty list is a valid outcome.

    Args:
        grid: A populated sweep grid (anything exposing ``a_values()``,
            ``eJ_values()``, ``ratio_array()``, ``mu`` and ``quad``).
        k: Target frequency ratio (trace both 2 and 1/2 to cover either
            branch of a "2:1" commensurability).
        evaluate_ratio: Override for the midpoint evaluations, called as
            ``evaluate_ratio(a, e_J) -> float | None``; defaults to the full
            pipeline with the grid's mu and quadrature settings.
        param_tol: Bisection tolerance in the varying parameter.

    Returns:
        List of ResonancePoint, ordered row-major by originating edge.
    """
    a_vals = grid.a_values()
    eJ_vals = grid.eJ_values()
    ratios = grid.ratio_array()
    if evaluate_ratio is None:
        mu, quad = grid.mu, grid.quad

        def evaluate_ratio(a, e_J):
            return point_ratio(a, e_J, mu, quad)

    points = []

    def bisect(fixed, lo, hi, r_lo, r_hi, vary_a):
        f_lo = r_lo - k
        while hi - lo > param_tol:
            mid = 0.5 * (lo + hi)
            r_mid = evaluate_ratio(mid, fixed) if vary_a else evaluate_ratio(fixed, mid)
            if r_mid is None:
                return None
            f_mid = r_mid - k
            if f_mid == 0.0:
                lo = hi = mid
                break
            if (f_mid < 0.0) == (f_lo < 0.0):
                lo, f_lo = mid, f_mid
            else:
                hi = mid
        mid = 0.5 * (lo + hi)
        r_mid = evaluate_ratio(mid, fixed) if vary_a else evaluate_ratio(fixed, mid)
        if r_mid is None:
            return None
        return mid, r_mid

    for i in range(len(a_vals)):
        for j in range(len(eJ_vals)):
            r0 = ratios[i, j]
            if not np.isfinite(r0):
                continue
            # Edge to the next a (same e_J).
            if i + 1 < len(a_vals) and np.isfinite(ratios[i + 1, j]):
                r1 = ratios[i + 1, j]
                if (r0 - k) * (r1 - k) < 0.0:
                    hit = bisect(eJ_vals[j], a_vals[i], a_vals[i + 1], r0, r1, True)
                    if hit is not None:
                        points.append(ResonancePoint(a=hit[0], e_J=float(eJ_vals[j]),
                                                     ratio=hit[1]))
            # Edge to the next e_J (same a).
            if j + 1 < len(eJ_vals) and np.isfinite(ratios[i, j + 1]):
                r1 = ratios[i, j + 1]
                if (r0 - k) * (r1 - k) < 0.0:
                    hit = bisect(a_vals[i], eJ_vals[j], eJ_vals[j + 1], r0, r1, False)
                    if hit is not None:
                        points.append(ResonancePoint(a=float(a_vals[i]), e_J=hit[0],
                                                     ratio=hit[1]))
    return points
