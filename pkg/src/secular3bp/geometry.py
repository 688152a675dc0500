"""Exact two-body geometry and canonical-variable conversions.

Units: the planet's semi-major axis is the length unit (a_J = 1) and the
total star+planet mass is the mass unit.  All angles are radians, stored
reduced to [0, 2*pi).

The canonical sets follow the usual celestial-mechanics conventions:
Delaunay momenta L = sqrt((1-mu) a), G = L sqrt(1-e^2), H = G cos i with
angles (l, g, h) = (mean anomaly, argument of periapsis, node), and the
Poincare pairs

    p1 = L                      q1 = l + g + h
    p2 = sqrt(2(L-G)) cos(g+h)  q2 = -sqrt(2(L-G)) sin(g+h)
    p3 = sqrt(2(G-H)) cos(h)    q3 = -sqrt(2(G-H)) sin(h)

Note the leading minus sign in q2, q3; sign conventions for the Poincare
angles differ across the literature, and this package implements the form
above consistently everywhere.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels

__all__ = [
    "TWO_PI",
    "OrbitConfig",
    "OsculatingElements",
    "DelaunayElements",
    "PoincareState",
    "ConversionFlags",
    "CartesianState",
    "PlanetState",
    "wrap_angle",
    "solve_kepler",
    "planet_position",
    "asteroid_plane_position",
    "rotation_matrix",
    "rotate_to_inertial",
    "asteroid_position",
    "delaunay_from_osculating",
    "osculating_from_delaunay",
    "poincare_from_delaunay",
    "delaunay_from_poincare",
    "orbit_min_separation",
    "aligned_separation",
    "aligned_noncrossing_interval",
]

TWO_PI = 2.0 * math.pi

# Relative slack for validating canonical inequalities that may be violated
# by rounding in round-trip conversions.
_VALIDATION_SLACK = 1e-9


def wrap_angle(x):
    """Reduce an angle (scalar or array) to [0, 2*pi)."""
    return np.mod(x, TWO_PI)


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OrbitConfig:
    """Problem parameters: asteroid semi-major axis, planet eccentricity, mass.

    The planet's semi-major axis is identically 1; it is not a parameter.
    ``mu`` is the planet mass fraction and defaults to the restricted limit 0,
    in which case the averaged coefficients are reported mu-free.
    """

    a: float
    e_J: float
    mu: float = 0.0

    def __post_init__(self):
        if not (self.a > 0.0 and math.isfinite(self.a)):
            raise ValueError(f"semi-major axis must be positive, got {self.a}")
        if not (0.0 <= self.e_J < 1.0):
            raise ValueError(f"planet eccentricity must be in [0, 1), got {self.e_J}")
        if not (0.0 <= self.mu < 1.0):
            raise ValueError(f"mass fraction must be in [0, 1), got {self.mu}")

    @property
    def L(self):
        """Delaunay momentum L = sqrt((1-mu) a)."""
        return math.sqrt((1.0 - self.mu) * self.a)

    def G_of(self, e):
        """Delaunay momentum G = L sqrt(1-e^2) at eccentricity e."""
        return self.L * math.sqrt(1.0 - e * e)


@dataclass(frozen=True)
class OsculatingElements:
    """Instantaneous Keplerian elements (a, e, i, omega, Omega, l)."""

    a: float
    e: float
    i: float
    omega: float
    Omega: float
    l: float

    def __post_init__(self):
        if not (self.a > 0.0):
            raise ValueError(f"semi-major axis must be positive, got {self.a}")
        if not (0.0 <= self.e < 1.0):
            raise ValueError(f"eccentricity must be in [0, 1), got {self.e}")
        for name in ("i", "omega", "Omega", "l"):
            object.__setattr__(self, name, float(wrap_angle(getattr(self, name))))


@dataclass(frozen=True)
class DelaunayElements:
    """Canonical Delaunay momenta (L, G, H) and conjugate angles (l, g, h)."""

    L: float
    G: float
    H: float
    l: float
    g: float
    h: float

    def __post_init__(self):
        slack = _VALIDATION_SLACK * max(self.L, 1.0)
        if not (0.0 < self.G <= self.L + slack):
            raise ValueError(f"need 0 < G <= L, got G={self.G}, L={self.L}")
        if abs(self.H) > self.G + slack:
            raise ValueError(f"need |H| <= G, got H={self.H}, G={self.G}")
        object.__setattr__(self, "G", min(self.G, self.L))
        object.__setattr__(self, "H", math.copysign(min(abs(self.H), self.G), self.H))
        for name in ("l", "g", "h"):
            object.__setattr__(self, name, float(wrap_angle(getattr(self, name))))


@dataclass(frozen=True)
class PoincareState:
    """Canonical Poincare variables (p1..p3, q1..q3)."""

    p1: float
    p2: float
    p3: float
    q1: float
    q2: float
    q3: float

    def __post_init__(self):
        if not (self.p1 > 0.0):
            raise ValueError(f"p1 = L must be positive, got {self.p1}")
        if self.p2**2 + self.q2**2 > 2.0 * self.p1 * (1.0 + _VALIDATION_SLACK):
            raise ValueError("p2^2 + q2^2 exceeds 2 L: no real eccentricity")


@dataclass(frozen=True)
class ConversionFlags:
    """Indeterminate-angle markers for the Poincare -> Delaunay map.

    On the singular sets e = 0 (G = L) and i = 0 (H = G) the angles g+h
    resp. h are undefined; the conversion still returns momenta, with the
    affected angles set to 0 and flagged here.
    """

    gh_indeterminate: bool = False
    h_indeterminate: bool = False


@dataclass(frozen=True)
class CartesianState:
    """Inertial asteroid position plus its orbital-plane coordinates."""

    x: float
    y: float
    z: float
    xp: float
    yp: float
    E: float


@dataclass(frozen=True)
class PlanetState:
    """Planet position on its prescribed ellipse (a_J = 1)."""

    xJ: float
    yJ: float
    EJ: float
    lJ: float


# ---------------------------------------------------------------------------
# Kepler equation
# ---------------------------------------------------------------------------

def solve_kepler(l, e, tol=1e-14, max_newton=50):
    """Solve E - e sin E = l for the eccentric anomaly E.

    Newton iteration seeded with E0 = l + e sin l, falling back to bisection
    on the rare non-converged cases.  Accepts scalars or arrays; E is
    continuous (and monotone) in l, with E - l staying on the same branch.

    Args:
        l: Mean anomaly in radians (any real value).
        e: Eccentricity in [0, 1).
        tol: Residual tolerance on |E - e sin E - l|.
        max_newton: Newton iterations before switching to bisection.

    Returns:
        Eccentric anomaly with the same shape as ``l``.
    """
    if not (0.0 <= e < 1.0):
        raise ValueError(f"eccentricity must be in [0, 1), got {e}")
    l_arr = np.asarray(l, dtype=float)
    if not np.all(np.isfinite(l_arr)):
        raise ValueError("mean anomaly must be finite")
    scalar = l_arr.ndim == 0
    lw = wrap_angle(l_arr)
    E = lw + e * np.sin(lw)
    resid = E - e * np.sin(E) - lw
    for _ in range(max_newton):
        bad = np.abs(resid) > tol
        if not np.any(bad):
            break
        E = np.where(bad, E - resid / (1.0 - e * np.cos(E)), E)
        resid = E - e * np.sin(E) - lw
    bad = np.abs(resid) > tol
    if np.any(bad):
        # Bisection on [lw - e, lw + e], which always brackets the root.
        lo = np.where(bad, lw - e, E)
        hi = np.where(bad, lw + e, E)
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            fm = mid - e * np.sin(mid) - lw
            lo = np.where(fm < 0.0, mid, lo)
            hi = np.where(fm < 0.0, hi, mid)
        E = np.where(bad, 0.5 * (lo + hi), E)
    E = E + (l_arr - lw)
    return float(E) if scalar else E


def planet_position(EJ, eJ):
    """Planet state at eccentric anomaly EJ on its prescribed ellipse."""
    if not (0.0 <= eJ < 1.0):
        raise ValueError(f"eccentricity must be in [0, 1), got {eJ}")
    xJ = math.cos(EJ) - eJ
    yJ = math.sqrt(1.0 - eJ * eJ) * math.sin(EJ)
    lJ = float(wrap_angle(EJ - eJ * math.sin(EJ)))
    return PlanetState(xJ=xJ, yJ=yJ, EJ=float(wrap_angle(EJ)), lJ=lJ)


def asteroid_plane_position(E, a, e):
    """Orbital-plane coordinates (x', y') of the asteroid at anomaly E."""
    if not (a > 0.0):
        raise ValueError(f"semi-major axis must be positive, got {a}")
    if not (0.0 <= e < 1.0):
        raise ValueError(f"eccentricity must be in [0, 1), got {e}")
    return a * (math.cos(E) - e), a * math.sqrt(1.0 - e * e) * math.sin(E)


def rotation_matrix(omega, i, Omega):
    """3x2 matrix taking orbital-plane (x', y') to inertial (x, y, z)."""
    co, so = math.cos(omega), math.sin(omega)
    ci, si = math.cos(i), math.sin(i)
    cO, sO = math.cos(Omega), math.sin(Omega)
    return np.array(
        [
            [cO * co - ci * sO * so, -cO * so - ci * sO * co],
            [sO * co + ci * cO * so, -sO * so + ci * cO * co],
            [si * so, si * co],
        ]
    )


def rotate_to_inertial(xp, yp, omega, i, Omega):
    """Rotate orbital-plane coordinates to the inertial frame."""
    m = rotation_matrix(omega, i, Omega)
    return (
        m[0, 0] * xp + m[0, 1] * yp,
        m[1, 0] * xp + m[1, 1] * yp,
        m[2, 0] * xp + m[2, 1] * yp,
    )


def asteroid_position(elements: OsculatingElements) -> CartesianState:
    """Full inertial state of the asteroid from osculating elements."""
    E = solve_kepler(elements.l, elements.e)
    xp, yp = asteroid_plane_position(E, elements.a, elements.e)
    x, y, z = rotate_to_inertial(xp, yp, elements.omega, elements.i, elements.Omega)
    return CartesianState(x=x, y=y, z=z, xp=xp, yp=yp, E=float(wrap_angle(E)))


# ---------------------------------------------------------------------------
# Delaunay / Poincare conversions
# ---------------------------------------------------------------------------

def delaunay_from_osculating(osc: OsculatingElements, mu=0.0) -> DelaunayElements:
    L = math.sqrt((1.0 - mu) * osc.a)
    G = L * math.sqrt(1.0 - osc.e**2)
    H = G * math.cos(osc.i)
    return DelaunayElements(L=L, G=G, H=H, l=osc.l, g=osc.omega, h=osc.Omega)


def osculating_from_delaunay(d: DelaunayElements, mu=0.0) -> OsculatingElements:
    a = d.L**2 / (1.0 - mu)
    ratio = min(d.G / d.L, 1.0)
    e = math.sqrt(max(0.0, 1.0 - ratio * ratio))
    i = math.acos(max(-1.0, min(1.0, d.H / d.G)))
    return OsculatingElements(a=a, e=e, i=i, omega=d.g, Omega=d.h, l=d.l)


def poincare_from_delaunay(d: DelaunayElements) -> PoincareState:
    """Forward map to Poincare variables (exact formulas, no regularization)."""
    r2 = math.sqrt(max(0.0, 2.0 * (d.L - d.G)))
    r3 = math.sqrt(max(0.0, 2.0 * (d.G - d.H)))
    gh = d.g + d.h
    return PoincareState(
        p1=d.L,
        p2=r2 * math.cos(gh),
        p3=r3 * math.cos(d.h),
        q1=float(wrap_angle(d.l + d.g + d.h)),
        q2=-r2 * math.sin(gh),
        q3=-r3 * math.sin(d.h),
    )


def delaunay_from_poincare(p: PoincareState, mu=0.0):
    """Inverse map; returns (DelaunayElements, ConversionFlags).

    The momenta are always recovered exactly; on the singular sets e = 0 and
    i = 0 the angles g+h resp. h are indeterminate and are returned as 0,
    flagged in ConversionFlags.  ``mu`` is accepted for symmetry with the
    element conversions; the Delaunay tuple itself is mu-free.
    """
    del mu
    L = p.p1
    G = L - 0.5 * (p.p2**2 + p.q2**2)
    H = G - 0.5 * (p.p3**2 + p.q3**2)
    gh_ind = p.p2 == 0.0 and p.q2 == 0.0
    h_ind = p.p3 == 0.0 and p.q3 == 0.0
    gh = 0.0 if gh_ind else math.atan2(-p.q2, p.p2)
    h = 0.0 if h_ind else math.atan2(-p.q3, p.p3)
    g = gh - h
    l = p.q1 - gh
    elements = DelaunayElements(L=L, G=G, H=H, l=l, g=g, h=h)
    return elements, ConversionFlags(gh_indeterminate=gh_ind, h_indeterminate=h_ind)


# ---------------------------------------------------------------------------
# inter-orbit separation (aligned coplanar geometry)
# ---------------------------------------------------------------------------

def _pair_distance_sq(a, e, eJ, E, EJ):
    se = math.sqrt(1.0 - e * e)
    sJ = math.sqrt(1.0 - eJ * eJ)
    dx = a * (math.cos(E) - e) - (math.cos(EJ) - eJ)
    dy = a * se * math.sin(E) - sJ * math.sin(EJ)
    return dx * dx + dy * dy


def _golden_min(f, lo, hi, iters=40):
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    c = hi - inv_phi * (hi - lo)
    d = lo + inv_phi * (hi - lo)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - inv_phi * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + inv_phi * (hi - lo)
            fd = f(d)
    return 0.5 * (lo + hi)


def orbit_min_separation(a, e, eJ, coarse_n=720, refine_rounds=8):
    """Minimum distance between the aligned asteroid and planet ellipses.

    Dense coarse sampling of the (E, EJ) torus followed by local grid
    refinement (shrinking 2-D windows around the running best sample) and a
    final pair of golden-section passes.  Deterministic for a fixed
    resolution.  A value of (numerically) zero means the curves intersect;
    values below the configured threshold mark the configuration as
    ORBIT_CROSSING in the hands of callers.

    Args:
        a: Asteroid semi-major axis (a_J = 1 units).
        e: Asteroid eccentricity, in [0, 1).
        eJ: Planet eccentricity, in [0, 1).
        coarse_n: Coarse grid resolution per anomaly.
        refine_rounds: Shrinking local-grid passes.

    Returns:
        The minimum inter-curve distance.
    """
    if not (a > 0.0):
        raise ValueError(f"semi-major axis must be positive, got {a}")
    if not (0.0 <= e < 1.0 and 0.0 <= eJ < 1.0):
        raise ValueError("eccentricities must be in [0, 1)")
    d2, i, j = kernels.min_sep_scan(a, e, eJ, coarse_n)
    step = TWO_PI / coarse_n
    E, EJ = i * step, j * step

    se = math.sqrt(1.0 - e * e)
    sJ = math.sqrt(1.0 - eJ * eJ)
    window = step
    # Local 17x17 grids shrinking 6x per round track narrow diagonal
    # valleys (near-tangent or crossing geometry) that axis-alternating
    # line searches stall on.
    local = np.linspace(-1.0, 1.0, 17)
    for _ in range(refine_rounds):
        Ev = E + window * local
        EJv = EJ + window * local
        dx = (a * (np.cos(Ev) - e))[:, None] - (np.cos(EJv) - eJ)[None, :]
        dy = (a * se * np.sin(Ev))[:, None] - (sJ * np.sin(EJv))[None, :]
        d2_grid = dx * dx + dy * dy
        k = int(np.argmin(d2_grid))
        E = float(Ev[k // 17])
        EJ = float(EJv[k % 17])
        window /= 6.0
    window *= 6.0
    E = _golden_min(lambda s: _pair_distance_sq(a, e, eJ, s, EJ), E - window, E + window)
    EJ = _golden_min(lambda s: _pair_distance_sq(a, e, eJ, E, s), EJ - window, EJ + window)
    return math.sqrt(_pair_distance_sq(a, e, eJ, E, EJ))


def aligned_separation(a, e, eJ, n_theta=512):
    """Exact minimum distance between the aligned ellipses (support form).

    For nested convex curves the boundary distance equals the minimum over
    directions of the support-function difference.  Both aligned confocal
    ellipses have centers on the x axis (asteroid at (-a e, 0) with
    semi-axes a, a sqrt(1-e^2); planet at (-eJ, 0) with semi-axes
    1, sqrt(1-eJ^2)), so the difference is a smooth 1-D function of the
    direction angle, minimized by dense sampling plus golden refinement.
    Returns 0 when the curves cross (including the whole a = 1 line).
    Two orders of magnitude cheaper than :func:`orbit_min_separation` and
    agrees with it wherever the separation is positive.
    """
    if a == 1.0:
        return 0.0

    def support_gap(theta):
        c = np.cos(theta)
        s = np.sin(theta)
        h_ast = -a * e * c + a * np.sqrt(c * c + (1.0 - e * e) * s * s)
        h_pl = -eJ * c + np.sqrt(c * c + (1.0 - eJ * eJ) * s * s)
        return h_pl - h_ast if a < 1.0 else h_ast - h_pl

    # Both support functions depend on theta through cos(theta) and
    # sin^2(theta), so [0, pi] covers all directions.
    theta = np.linspace(0.0, math.pi, n_theta)
    gaps = support_gap(theta)
    k = int(np.argmin(gaps))
    lo = theta[max(k - 1, 0)]
    hi = theta[min(k + 1, n_theta - 1)]
    t = _golden_min(lambda s: float(support_gap(np.asarray(s))), lo, hi, iters=60)
    return max(0.0, float(support_gap(np.asarray(t))))


def aligned_noncrossing_interval(a, eJ):
    """Eccentricity interval (e_lo, e_hi) of non-crossing aligned orbits.

    Two confocal ellipses with coinciding periapsis directions intersect
    exactly when their periapsis-distance and apoapsis-distance ratios
    straddle 1, so the non-crossing condition reduces to

        inner (a < 1):  a (1 - e) < 1 - eJ  and  a (1 + e) < 1 + eJ
        outer (a > 1):  a (1 - e) > 1 - eJ  and  a (1 + e) > 1 + eJ

    Returns None when no non-crossing eccentricity exists (always the case
    at a = 1).
    """
    if a < 1.0:
        e_lo = max(0.0, 1.0 - (1.0 - eJ) / a)
        e_hi = min(1.0, (1.0 + eJ) / a - 1.0)
    elif a > 1.0:
        e_lo = max(0.0, (1.0 + eJ) / a - 1.0)
        e_hi = min(1.0, 1.0 - (1.0 - eJ) / a)
    else:
        return None
    if e_lo >= e_hi:
        return None
    return e_lo, e_hi
