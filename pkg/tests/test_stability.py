import math

import numpy as np
import pytest

from secular3bp.averaging import QuadratureSpec
from secular3bp.equilibrium import find_equilibrium
from secular3bp.errors import DegenerateError
from secular3bp.geometry import OrbitConfig
from secular3bp.stability import (
    INCONCLUSIVE,
    LINEARLY_STABLE,
    UNSTABLE,
    classify_spatial,
    frequencies,
    linearized_matrix,
    sign_verdict,
    trace_resonance,
)
from secular3bp.sweep import CellResult, SweepGrid, evaluate_cell


class TestSignVerdict:
    def test_clear_negative_signs(self):
        assert sign_verdict(-0.1, -0.2, 1e-12, 1e-12) == LINEARLY_STABLE

    def test_error_band_straddling_zero(self):
        # Cbar within error of 0: no certification possible.
        assert sign_verdict(-0.1, -1e-12, 1e-12, 1e-10) == INCONCLUSIVE

    def test_positive_sign(self):
        assert sign_verdict(-0.1, 0.2, 1e-12, 1e-12) == UNSTABLE

    def test_margin_factor(self):
        # |value| must exceed 3x the error.
        assert sign_verdict(-4e-9, -0.1, 1e-9, 1e-12) == LINEARLY_STABLE
        assert sign_verdict(-2e-9, -0.1, 1e-9, 1e-12) == INCONCLUSIVE


class _FakeEq:
    def __init__(self, hessian):
        self.hessian = hessian


class TestFrequencies:
    def test_harmonic_normal_form(self):
        # H = alpha (p^2 + q^2) has frequency 2 alpha; here the Hessian of
        # the generating function is 2 alpha I, so sqrt(det) = 2 alpha.
        alpha = 0.3
        eq = _FakeEq(np.diag([2 * alpha, 2 * alpha]))
        om_p, _, _ = frequencies(None, eq, -1.0, -1.0)
        assert om_p == pytest.approx(2 * alpha, rel=1e-15)

    def test_equal_coefficients(self):
        c = 0.4
        eq = _FakeEq(np.diag([1.0, 1.0]))
        _, om_z, _ = frequencies(None, eq, -c, -c)
        assert om_z == pytest.approx(2 * c, rel=1e-15)

    def test_degenerate_product(self):
        eq = _FakeEq(np.diag([1.0, 1.0]))
        with pytest.raises(DegenerateError):
            frequencies(None, eq, -0.1, 0.2)

    def test_degenerate_hessian(self):
        eq = _FakeEq(np.diag([1.0, -1.0]))
        with pytest.raises(DegenerateError):
            frequencies(None, eq, -0.1, -0.2)


class TestClassify:
    def test_reference_point(self, quad):
        cfg = OrbitConfig(a=0.4, e_J=0.3)
        eq = find_equilibrium(cfg, quad)
        rec = classify_spatial(cfg, eq, quad)
        assert rec.spatial_verdict == LINEARLY_STABLE
        assert rec.Abar < 0.0 and rec.Cbar < 0.0
        assert rec.ratio == pytest.approx(rec.omega_z / rec.omega_plane)

    def test_rejects_failed_equilibrium(self, quad):
        cfg = OrbitConfig(a=1.0, e_J=0.3)
        eq = find_equilibrium(cfg, quad)
        with pytest.raises(ValueError):
            classify_spatial(cfg, eq, quad)

    def test_ratio_mu_invariance(self, quad):
        # Both frequencies carry the common factor mu (1-mu)^(-1/2), so the
        # reported (mu-scaled) values shift together and the ratio is fixed.
        base = evaluate_cell(0.4, 0.3, 0.0, quad)
        alt = evaluate_cell(0.4, 0.3, 0.25, quad)
        assert base.stability.ratio == pytest.approx(alt.stability.ratio,
                                                     abs=1e-12)
        factor = (1.0 - 0.25) ** -0.5
        assert alt.stability.omega_z / base.stability.omega_z == pytest.approx(
            factor, rel=1e-9)
        assert alt.stability.omega_plane / base.stability.omega_plane == \
            pytest.approx(factor, rel=1e-9)


class TestLinearizedMatrix:
    def test_spectrum_matches_frequencies(self, quad):
        cfg = OrbitConfig(a=0.4, e_J=0.3)
        eq = find_equilibrium(cfg, quad)
        rec = classify_spatial(cfg, eq, quad)
        om_p, om_z, _ = frequencies(cfg, eq, rec.Abar, rec.Cbar)
        M = linearized_matrix(eq.hessian, rec.Abar, rec.Cbar, mu=1.0)
        eigs = np.linalg.eigvals(M)
        assert np.max(np.abs(eigs.real)) < 1e-8 * max(om_p, om_z)
        got = np.sort(np.abs(eigs.imag))
        want = np.sort([om_p, om_p, om_z, om_z])
        assert np.allclose(got, want, rtol=1e-8)

    def test_mu_scales_spectrum(self):
        hess = np.diag([0.3, 0.4])
        M1 = linearized_matrix(hess, -0.2, -0.5, mu=1.0)
        M2 = linearized_matrix(hess, -0.2, -0.5, mu=0.01)
        assert np.allclose(M2, 0.01 * M1)


def synthetic_grid(ratio_fn, a_vals, eJ_vals):
    """SweepGrid whose cells carry a planted ratio field."""

    class _Stab:
        def __init__(self, ratio):
            self.ratio = ratio
            self.coefficients = None
            self.omega_plane = math.nan
            self.omega_z = math.nan
            self.spatial_verdict = LINEARLY_STABLE

    grid = SweepGrid(
        a_min=float(a_vals[0]), a_max=float(a_vals[-1]), n_a=len(a_vals),
        eJ_min=float(eJ_vals[0]), eJ_max=float(eJ_vals[-1]), n_eJ=len(eJ_vals),
        mu=0.0, quad=QuadratureSpec(),
    )
    grid.cells = [
        CellResult(a=float(a), e_J=float(e), status="FOUND",
                   stability=_Stab(ratio_fn(float(a), float(e))))
        for a in a_vals for e in eJ_vals
    ]
    return grid


class TestTraceResonance:
    def test_planted_linear_field(self):
        a_vals = np.linspace(0.2, 0.8, 13)
        eJ_vals = np.linspace(0.2, 0.8, 13)
        grid = synthetic_grid(lambda a, e: a + e, a_vals, eJ_vals)
        points = trace_resonance(grid, k=1.0,
                                 evaluate_ratio=lambda a, e: a + e,
                                 param_tol=1e-6)
        assert len(points) > 0
        for p in points:
            assert abs(p.a + p.e_J - 1.0) <= 1e-4

    def test_everywhere_below_k(self):
        a_vals = np.linspace(0.2, 0.8, 5)
        eJ_vals = np.linspace(0.2, 0.8, 5)
        grid = synthetic_grid(lambda a, e: 1.0 + 0.1 * a, a_vals, eJ_vals)
        assert trace_resonance(grid, k=2.0,
                               evaluate_ratio=lambda a, e: 1.0 + 0.1 * a) == []

    def test_failed_midpoint_drops_edge(self):
        a_vals = np.linspace(0.2, 0.8, 5)
        eJ_vals = np.linspace(0.2, 0.8, 5)
        grid = synthetic_grid(lambda a, e: a + e, a_vals, eJ_vals)
        assert trace_resonance(grid, k=1.0,
                               evaluate_ratio=lambda a, e: None) == []
