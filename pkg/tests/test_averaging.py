import math

import numpy as np
import pytest
from scipy.special import ellipk

from secular3bp import kernels
from secular3bp.averaging import (
    AveragedCoefficients,
    QuadratureSpec,
    SeparationGuard,
    averaged_AC,
    averaged_B,
    averaged_R,
    averaged_coefficients,
    direct_average_V3d,
    disturbing_V,
    separation_pair,
)
from secular3bp.errors import NonConvergedError, OrbitCrossingError
from secular3bp.geometry import OrbitConfig, PoincareState


def brute_force_rbar(a, e, eJ, n=2048, g=0.0):
    """Full-domain midpoint-rule reference, plain numpy, chunked."""
    E = (np.arange(n) + 0.5) * 2.0 * np.pi / n
    EJ = (np.arange(n) + 0.5) * 2.0 * np.pi / n
    xp = a * (np.cos(E) - e)
    yp = a * math.sqrt(1.0 - e * e) * np.sin(E)
    x = math.cos(g) * xp - math.sin(g) * yp
    y = math.sin(g) * xp + math.cos(g) * yp
    xJ = np.cos(EJ) - eJ
    yJ = math.sqrt(1.0 - eJ * eJ) * np.sin(EJ)
    wJ = 1.0 - eJ * np.cos(EJ)
    total = 0.0
    step = 256
    for lo in range(0, n, step):
        hi = min(lo + step, n)
        w = np.outer(1.0 - e * np.cos(E[lo:hi]), wJ)
        r1 = np.sqrt((x[lo:hi, None] - xJ[None, :]) ** 2
                     + (y[lo:hi, None] - yJ[None, :]) ** 2)
        total += float(np.sum(w / r1))
    return total / (n * n)


def unfolded_AC_oracle(a, e, eJ, mu, n=1024):
    """Full-domain averages of the raw (unfolded) A and C coefficients."""
    E = (np.arange(n) + 0.5) * 2.0 * np.pi / n
    EJ = (np.arange(n) + 0.5) * 2.0 * np.pi / n
    x = a * (np.cos(E) - e)
    y = a * math.sqrt(1.0 - e * e) * np.sin(E)
    xJ = np.cos(EJ) - eJ
    yJ = math.sqrt(1.0 - eJ * eJ) * np.sin(EJ)
    w = np.outer(1.0 - e * np.cos(E), 1.0 - eJ * np.cos(EJ))
    r1 = np.sqrt((x[:, None] - xJ[None, :]) ** 2 + (y[:, None] - yJ[None, :]) ** 2)
    G = math.sqrt((1.0 - mu) * a * (1.0 - e * e))
    abar = float(np.mean(-0.5 * w * np.outer(y, yJ) / (r1**3 * G)))
    cbar = float(np.mean(-0.5 * w * np.outer(x, xJ) / (r1**3 * G)))
    rbar = float(np.mean(w / r1))
    return rbar, abar, cbar


class TestDisturbingV:
    def test_values(self):
        assert disturbing_V(1, 0, 0, 0, 1) == pytest.approx(1 / math.sqrt(2))
        assert disturbing_V(0, 0, 1, 0, 0) == 1.0
        assert disturbing_V(0.3, 0.4, 0, -0.2, 0.1) == pytest.approx(
            1 / math.sqrt(0.25 + 0.09))

    def test_coincident_raises(self):
        with pytest.raises(ValueError):
            disturbing_V(0.5, 0.5, 0.0, 0.5, 0.5)

    def test_separation_pair(self):
        pair = separation_pair(1.0, 1.0, 0.0, 1.0)
        assert pair.r1 == pytest.approx(1.0)
        assert pair.r2 == pytest.approx(math.sqrt(1.0 + 4.0))


class TestAveragedR:
    def test_small_a_limit(self, quad):
        # The outer average of 1/r_J over the planet's mean anomaly is
        # exactly 1/a_J = 1; the a^2 correction is ~3e-7 at a = 1e-3.
        cfg = OrbitConfig(a=1e-3, e_J=0.3)
        rbar, err = averaged_R(cfg, 0.2, 0.0, quad)
        assert rbar == pytest.approx(1.0, abs=1e-5)
        assert err < 1e-9

    def test_brute_force_and_elliptic_oracle(self, quad):
        # Concentric circles: Rbar has the closed form
        # (2 / pi (1+a)) K(4a/(1+a)^2) with K the complete elliptic
        # integral of the first kind (parameter convention).
        a = 0.1
        cfg = OrbitConfig(a=a, e_J=0.0)
        rbar, _ = averaged_R(cfg, 0.0, 0.0, quad)
        oracle = brute_force_rbar(a, 0.0, 0.0, n=2048)
        closed = 2.0 / (math.pi * (1.0 + a)) * ellipk(4.0 * a / (1.0 + a) ** 2)
        assert rbar == pytest.approx(oracle, abs=1e-12)
        assert rbar == pytest.approx(closed, abs=1e-10)

    def test_brute_force_eccentric(self, quad):
        cfg = OrbitConfig(a=0.35, e_J=0.4)
        rbar, _ = averaged_R(cfg, 0.22, 0.0, quad)
        assert rbar == pytest.approx(brute_force_rbar(0.35, 0.22, 0.4), rel=1e-11)

    def test_circular_planet_g_symmetry(self, quad):
        cfg = OrbitConfig(a=0.3, e_J=0.0)
        base, _ = averaged_R(cfg, 0.25, 0.0, quad)
        for g in (0.7, math.pi / 2.0, 2.5):
            val, _ = averaged_R(cfg, 0.25, g, quad)
            assert val == pytest.approx(base, rel=1e-9)

    def test_general_g_against_brute_force(self, quad):
        cfg = OrbitConfig(a=0.3, e_J=0.4)
        val, _ = averaged_R(cfg, 0.2, 1.1, quad)
        assert val == pytest.approx(brute_force_rbar(0.3, 0.2, 0.4, g=1.1),
                                    rel=1e-11)

    def test_crossing_refused_aligned(self, quad):
        with pytest.raises(OrbitCrossingError):
            averaged_R(OrbitConfig(a=1.0, e_J=0.3), 0.3, 0.0, quad)

    def test_crossing_refused_rotated(self, quad):
        with pytest.raises(OrbitCrossingError):
            averaged_R(OrbitConfig(a=1.0, e_J=0.3), 0.3, 0.5, quad)

    def test_near_crossing_not_converged(self):
        # Separation ~4e-3: above the crossing threshold but too close for
        # geometric convergence within a reduced node cap.
        quad = QuadratureSpec(max_n=1024)
        cfg = OrbitConfig(a=0.72, e_J=0.3)
        e = 0.80  # apoapsis gap = 1.3 - 0.72 * 1.80 = 0.004
        with pytest.raises(NonConvergedError):
            averaged_R(cfg, e, 0.0, quad)


class TestAveragedAC:
    def test_folding_equivalence(self, quad):
        for (a, e, eJ) in [(0.5, 0.1, 0.2), (0.25, 0.35, 0.55), (2.2, 0.25, 0.4)]:
            cfg = OrbitConfig(a=a, e_J=eJ)
            abar, cbar, _ = averaged_AC(cfg, e, quad)
            rbar, _ = averaged_R(cfg, e, 0.0, quad)
            ref_r, ref_a, ref_c = unfolded_AC_oracle(a, e, eJ, 0.0)
            assert abar == pytest.approx(ref_a, rel=1e-10)
            assert cbar == pytest.approx(ref_c, rel=1e-10)
            assert rbar == pytest.approx(ref_r, rel=1e-10)

    def test_abar_negative(self, quad):
        for (a, e, eJ) in [(0.1, 0.05, 0.1), (0.5, 0.3, 0.4), (3.0, 0.2, 0.6)]:
            abar, cbar, errs = averaged_AC(OrbitConfig(a=a, e_J=eJ), e, quad)
            assert abar < 0.0
            assert errs["Abar"] >= 0.0

    def test_mu_scaling(self, quad):
        # G = sqrt((1-mu) a (1-e^2)) is the only mu dependence.
        a, e, eJ = 0.5, 0.1, 0.2
        a0, c0, _ = averaged_AC(OrbitConfig(a=a, e_J=eJ, mu=0.0), e, quad)
        a1, c1, _ = averaged_AC(OrbitConfig(a=a, e_J=eJ, mu=0.5), e, quad)
        factor = 1.0 / math.sqrt(1.0 - 0.5)
        assert a1 / a0 == pytest.approx(factor, rel=1e-12)
        assert c1 / c0 == pytest.approx(factor, rel=1e-12)


class TestAveragedB:
    def test_doubly_circular(self, quad):
        cfg = OrbitConfig(a=0.3, e_J=0.0)
        bbar, _ = averaged_B(cfg, 0.0, quad)
        assert abs(bbar) < 1e-12

    def test_generic_points(self, quad):
        for (a, e, eJ) in [(2.5, 0.4, 0.6), (0.4, 0.3, 0.5), (0.15, 0.6, 0.2)]:
            bbar, err = averaged_B(OrbitConfig(a=a, e_J=eJ), e, quad)
            assert abs(bbar) < 1e-10
            assert err < 1e-10

    def test_coefficients_bundle(self, quad):
        cfg = OrbitConfig(a=0.4, e_J=0.3)
        coeffs = averaged_coefficients(cfg, 0.17, quad)
        assert isinstance(coeffs, AveragedCoefficients)
        assert coeffs.Abar < 0.0
        assert abs(coeffs.Bbar) < 1e-10
        assert not coeffs.crossing_flag
        assert set(coeffs.err) == {"Rbar", "Abar", "Bbar", "Cbar"}


class TestDoublingControl:
    def test_reported_error_is_conservative(self, quad):
        cfg = OrbitConfig(a=0.5, e_J=0.2)
        rbar, err = averaged_R(cfg, 0.1, 0.0, quad)
        fine = brute_force_rbar(0.5, 0.1, 0.2, n=4096)
        assert abs(rbar - fine) <= max(err, 1e-12) + 1e-12

    def test_quadrature_spec_validation(self):
        with pytest.raises(ValueError):
            QuadratureSpec(n_ast=4)
        with pytest.raises(ValueError):
            QuadratureSpec(tol=0.0)
        with pytest.raises(ValueError):
            QuadratureSpec(n_ast=256, max_n=128)


class TestSeparationGuard:
    def test_threshold_refusal(self):
        cfg = OrbitConfig(a=0.72, e_J=0.3)
        guard = SeparationGuard(cfg)
        guard.check(0.5)  # comfortably separated
        with pytest.raises(OrbitCrossingError):
            guard.check(0.805)  # apoapsis gap ~4e-4, below 1e-3

    def test_lipschitz_shortcut_consistency(self):
        cfg = OrbitConfig(a=0.4, e_J=0.3)
        guard = SeparationGuard(cfg)
        sep = guard.min_separation(0.3)
        assert guard.separation_lower_bound(0.3005) >= sep - 4.0 * 0.4 * 0.0006
        guard.check(0.3005)  # must pass without any new exact evaluation
        assert set(guard._cache) == {0.3}


class TestDirectAverage3D:
    def test_base_point_equals_rbar(self, quad):
        cfg = OrbitConfig(a=0.4, e_J=0.3)
        e = 0.17
        L = cfg.L
        p2 = math.sqrt(2.0 * (L - cfg.G_of(e)))
        state = PoincareState(p1=L, p2=p2, p3=0.0, q1=0.0, q2=0.0, q3=0.0)
        v3d, _ = direct_average_V3d(cfg, state, quad)
        rbar, _ = averaged_R(cfg, e, 0.0, quad)
        assert v3d == pytest.approx(rbar, rel=1e-10)

    def test_fd_hessian_matches_coefficients(self, quad):
        # Second derivatives in (p3, q3) of the 3-D average reproduce
        # (2 Abar, 2 Cbar); the cross term vanishes by symmetry.
        cfg = OrbitConfig(a=0.4, e_J=0.3)
        e = 0.17
        abar, cbar, _ = averaged_AC(cfg, e, quad)
        from secular3bp.validate import spatial_quadratic_oracle

        fd = spatial_quadratic_oracle(cfg, e, quad)
        assert fd["d2_p3"] == pytest.approx(2.0 * abar, rel=1e-6)
        assert fd["d2_q3"] == pytest.approx(2.0 * cbar, rel=1e-6)
        assert abs(fd["cross"]) < 1e-8

    def test_inconsistent_p1_rejected(self, quad):
        cfg = OrbitConfig(a=0.4, e_J=0.3)
        state = PoincareState(p1=1.0, p2=0.1, p3=0.0, q1=0.0, q2=0.0, q3=0.0)
        with pytest.raises(ValueError):
            direct_average_V3d(cfg, state, quad)


@pytest.mark.skipif(not kernels.NUMBA_ENABLED, reason="numba backend disabled")
class TestBackendEquivalence:
    CASES = [
        ("quarter_sums", (0.4, 0.17, 0.3, 48, 48)),
        ("bbar_mean", (0.4, 0.17, 0.3, 48, 48)),
        ("rbar_rotated_mean", (0.4, 0.17, 0.3, math.cos(0.6), math.sin(0.6), 48, 48)),
        ("vbar_mean", (0.4, 0.17, 0.3, 1.0, 0.0, 0.0, 0.99, 0.0, 0.1, 48, 48)),
        ("min_sep_scan", (0.4, 0.17, 0.3, 96)),
    ]

    @pytest.mark.parametrize("name,args", CASES, ids=[c[0] for c in CASES])
    def test_numba_matches_numpy(self, name, args):
        got_nb = np.atleast_1d(np.asarray(getattr(kernels, name + "_numba")(*args)))
        got_np = np.atleast_1d(np.asarray(getattr(kernels, name + "_numpy")(*args)))
        assert np.allclose(got_nb, got_np, rtol=1e-13, atol=1e-15)
