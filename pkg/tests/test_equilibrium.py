import math

import numpy as np
import pytest

from secular3bp.averaging import QuadratureSpec, averaged_R
from secular3bp.equilibrium import (
    POSITIVE_DEFINITE,
    STATUS_CROSSING,
    STATUS_FOUND,
    STATUS_NO_ROOT,
    PlanarState,
    dRbar_de,
    find_equilibrium,
    planar_hessian,
)
from secular3bp.geometry import OrbitConfig


def rbar_fine(cfg, e, g=0.0, nodes=512):
    """Fixed-node Rbar evaluation used by the derivative oracles."""
    val, _ = averaged_R(cfg, e, g, QuadratureSpec(), nodes=nodes)
    return val


def ninepoint_derivative_oracle(cfg, e, h=1e-3, nodes=512):
    """Eighth-order 9-point central first derivative on a finer quadrature."""
    weights = np.array([3.0, -32.0, 168.0, -672.0, 0.0,
                        672.0, -168.0, 32.0, -3.0]) / 840.0
    offsets = np.arange(-4, 5)
    return sum(
        w * rbar_fine(cfg, e + k * h, nodes=nodes)
        for w, k in zip(weights, offsets) if w != 0.0
    ) / h


class TestDerivative:
    def test_against_ninepoint_oracle(self, quad):
        cfg = OrbitConfig(a=0.3, e_J=0.4)
        got, err = dRbar_de(cfg, 0.2, quad)
        want = ninepoint_derivative_oracle(cfg, 0.2)
        assert got == pytest.approx(want, abs=5e-9)
        assert err < 1e-6

    def test_circular_planet_g_independent(self, quad):
        # For e_J = 0 the averaged function is g-independent, so the
        # derivative can be cross-checked at a rotated configuration.
        cfg = OrbitConfig(a=0.3, e_J=0.0)
        got, _ = dRbar_de(cfg, 0.2, quad)
        h = 1e-4
        rotated = (rbar_fine(cfg, 0.2 + h, g=math.pi / 2.0)
                   - rbar_fine(cfg, 0.2 - h, g=math.pi / 2.0)) / (2.0 * h)
        assert got == pytest.approx(rotated, abs=1e-8)

    def test_one_sided_at_zero(self, quad):
        cfg = OrbitConfig(a=0.3, e_J=0.4)
        val, err = dRbar_de(cfg, 0.0, quad)
        assert math.isfinite(val) and math.isfinite(err)
        # cross-check with a one-sided oracle on the fine grid
        h = 1e-4
        f0 = rbar_fine(cfg, 0.0)
        want = (-3 * f0 + 4 * rbar_fine(cfg, h) - rbar_fine(cfg, 2 * h)) / (2 * h)
        assert val == pytest.approx(want, abs=1e-7)

    def test_domain_error(self, quad):
        with pytest.raises(ValueError):
            dRbar_de(OrbitConfig(a=0.3, e_J=0.4), 1.5, quad)


def grid_scan_oracle(cfg, lo, hi, resolution=1e-4):
    """Dense scan of Rbar(e): returns the interior local-minimum abscissa."""
    es = np.arange(lo, hi, resolution)
    vals = np.array([rbar_fine(cfg, float(e), nodes=256) for e in es])
    k = int(np.argmin(vals))
    assert 0 < k < len(es) - 1, "minimum hit the scan boundary"
    return float(es[k])


class TestFindEquilibrium:
    def test_reference_point(self, quad):
        cfg = OrbitConfig(a=0.4, e_J=0.3)
        rec = find_equilibrium(cfg, quad)
        assert rec.status == STATUS_FOUND
        assert rec.residual < 1e-11
        assert rec.hessian_definite == POSITIVE_DEFINITE
        assert abs(rec.e_star - grid_scan_oracle(cfg, 0.05, 0.4)) <= 1e-4

    def test_small_a(self, quad):
        cfg = OrbitConfig(a=0.08, e_J=0.3)
        rec = find_equilibrium(cfg, quad)
        assert rec.status == STATUS_FOUND
        assert abs(rec.e_star - grid_scan_oracle(cfg, 1e-3, 0.2)) <= 1e-4

    def test_outer_region(self, quad):
        cfg = OrbitConfig(a=2.5, e_J=0.3)
        rec = find_equilibrium(cfg, quad)
        assert rec.status == STATUS_FOUND
        assert rec.hessian_definite == POSITIVE_DEFINITE
        assert rec.residual < 1e-11

    def test_circular_planet_no_root(self, quad):
        # e_J -> 0: the aligned forced eccentricity collapses to 0, below
        # the bracket floor; the documented boundary outcome is NO_ROOT.
        rec = find_equilibrium(OrbitConfig(a=0.3, e_J=0.0), quad)
        assert rec.status == STATUS_NO_ROOT

    def test_crossing_bracket(self, quad):
        rec = find_equilibrium(OrbitConfig(a=1.0, e_J=0.3), quad)
        assert rec.status == STATUS_CROSSING

    def test_near_boundary_cell_survives(self, quad):
        # Low-e scan points sit within the crossing guard here (periapsis
        # gap = a*e when a = 1 - e_J); masking must not lose the root.
        rec = find_equilibrium(OrbitConfig(a=0.3, e_J=0.7), quad)
        assert rec.status == STATUS_FOUND
        assert rec.e_star == pytest.approx(0.424, abs=5e-3)

    def test_residual_invariant(self, quad):
        for (a, eJ) in [(0.2, 0.5), (0.45, 0.2), (1.9, 0.4)]:
            rec = find_equilibrium(OrbitConfig(a=a, e_J=eJ), quad)
            assert rec.status == STATUS_FOUND
            assert rec.residual < 1e-11

    def test_continuity_along_a(self, quad):
        eJ = 0.3
        a_vals = np.linspace(0.30, 0.34, 5)
        stars = []
        for a in a_vals:
            rec = find_equilibrium(OrbitConfig(a=float(a), e_J=eJ), quad)
            assert rec.status == STATUS_FOUND
            stars.append(rec.e_star)
        diffs = np.abs(np.diff(stars))
        # e*(a) is smooth here; steps of da = 0.01 move e* by O(da).
        assert diffs.max() < 0.05


class TestPlanarHessian:
    def test_structure_at_equilibrium(self, quad):
        cfg = OrbitConfig(a=0.4, e_J=0.3)
        rec = find_equilibrium(cfg, quad)
        hess = rec.hessian
        assert hess[0, 1] == hess[1, 0]
        scale = max(abs(hess[0, 0]), abs(hess[1, 1]))
        assert abs(hess[0, 1]) < 1e-6 * scale
        assert np.all(np.linalg.eigvalsh(hess) > 0.0)

    def test_chain_rule_consistency(self, quad):
        # d2Rbar/dp2^2 must match the chain-rule transform of the e-space
        # derivatives:  f_pp = R_ee (de/dp2)^2 + R_e d2e/dp2^2  at q2 = 0.
        cfg = OrbitConfig(a=0.4, e_J=0.3)
        e0 = 0.22  # generic point, no need to sit at the equilibrium
        hess = planar_hessian(cfg, e0, quad)

        L = cfg.L
        G = cfg.G_of(e0)
        p2 = math.sqrt(2.0 * (L - G))
        de_dp2 = p2 * G / (L**2 * e0)
        # d2e/dp2^2 from differentiating de/dp2 = p2 G / (L^2 e):
        dG_dp2 = -p2
        de2 = (G + p2 * dG_dp2) / (L**2 * e0) - p2 * G * de_dp2 / (L**2 * e0**2)

        # Richardson-extrapolated e-space derivatives: h large enough to
        # dominate rounding, extrapolation killing the h^2 truncation.
        h = 1e-3
        f0 = rbar_fine(cfg, e0)

        def d1(step):
            return (rbar_fine(cfg, e0 + step) - rbar_fine(cfg, e0 - step)) / (2 * step)

        def d2(step):
            return (rbar_fine(cfg, e0 + step) - 2 * f0
                    + rbar_fine(cfg, e0 - step)) / step**2

        r_e = (4 * d1(h / 2) - d1(h)) / 3
        r_ee = (4 * d2(h / 2) - d2(h)) / 3
        expected_pp = r_ee * de_dp2**2 + r_e * de2
        assert hess[0, 0] == pytest.approx(expected_pp, rel=1e-6)


class TestPlanarState:
    def test_representation_consistency(self):
        L = math.sqrt(0.4)
        st = PlanarState.from_polar(0.3, 0.0, L)
        assert st.q2 == 0.0 and st.p2 > 0.0
        assert st.consistent_with(L)
        back = PlanarState.from_canonical(st.p2, st.q2, L)
        assert back.e == pytest.approx(0.3, abs=1e-14)
        assert back.g == pytest.approx(0.0, abs=1e-14)

    def test_round_trip_generic(self):
        L = 1.3
        st = PlanarState.from_polar(0.55, 2.1, L)
        back = PlanarState.from_canonical(st.p2, st.q2, L)
        assert back.e == pytest.approx(0.55, abs=1e-13)
        assert back.g == pytest.approx(2.1, abs=1e-13)
        assert st.consistent_with(L)
