import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from vortexre import families as F
from vortexre.derivatives import apply_K, circulation_matrix, hessian_H
from vortexre.model import vortex_angular_momentum
from vortexre.spectral import reduced_matrix

# sympy nroots of 9m^3 + 3m^2 + 7m + 5 at 30 digits
M_STAR = -0.595097854468427207843253063256
KAPPA = 0.127771339758078310171842781433


def C_of(fp):
    return hessian_H(fp.hat, fp.circulations.gamma) / np.repeat(fp.circulations.gamma, 2)[:, None]


class TestConstants:
    def test_m_star_oracle(self):
        k = F.rhombus_constants()
        assert abs(k.m_star - M_STAR) < 1e-12
        assert abs(k.kappa - KAPPA) < 1e-12

    def test_printed_values(self):
        k = F.rhombus_constants()
        assert abs(k.m_star - (-0.5951)) <= 5e-5
        assert abs(k.kappa - 0.1278) <= 5e-5

    def test_L_zero_point(self):
        k = F.rhombus_constants()
        assert vortex_angular_momentum([1, 1, k.m_Lzero, k.m_Lzero]) == pytest.approx(0, abs=1e-15)

    def test_bisect_newton_requires_sign_change(self):
        with pytest.raises(ValueError):
            F.cubic_root_bisect_newton([1, 0, 1], -1, 1)

    def test_bisect_newton_known_root(self):
        assert F.cubic_root_bisect_newton([1, 0, -2], 0, 2) == pytest.approx(math.sqrt(2), abs=1e-14)


class TestTriangle:
    def test_unit_strengths(self):
        fp = F.triangle(1, 1, 1)
        assert fp.omega == pytest.approx(1.0)
        assert fp.analytic_mu == pytest.approx([-1, 0, 0, 0, 0, 1], abs=1e-15)

    def test_reduced_spectrum_symbolic(self):
        # sympy eigenvalues of M^-1 D2H for (1, 1, -2/5): 0 (x2), +-7/15, +-8/15
        fp = F.triangle(1, 1, -0.4)
        mu = np.sort(np.linalg.eigvals(C_of(fp)).real)
        assert mu == pytest.approx([-8 / 15, -7 / 15, 0, 0, 7 / 15, 8 / 15], abs=1e-12)
        assert fp.analytic_mu == pytest.approx(mu, abs=1e-12)

    @given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
    def test_sum_of_squares_form(self, a, b, c):
        total = a + b + c
        L = a * b + a * c + b * c
        assert F.triangle_mu_squared(a, b, c) == pytest.approx(total ** 2 / 9 - L / 3, abs=1e-12)

    def test_zero_total_rejected(self):
        with pytest.raises(ValueError):
            F.triangle(1, 1, -2)


class TestRhombus:
    @pytest.mark.parametrize("m", [-0.9, -0.5, -0.2, 0.3, 1.0])
    def test_branch_A_relation(self, m):
        y2 = F.rhombus_y2(m, "A")
        assert F.rhombus_m_of_y2(y2) == pytest.approx(m, abs=1e-12)

    @pytest.mark.parametrize("m", [-0.9, -0.5, -0.1, -1e-6])
    def test_branch_B_relation(self, m):
        y2 = F.rhombus_y2(m, "B")
        assert F.rhombus_m_of_y2(y2) == pytest.approx(m, rel=1e-9, abs=1e-12)

    def test_square_at_m_one(self):
        fp = F.rhombus(1.0, "A")
        assert fp.hat[5] == pytest.approx(1.0)
        assert fp.omega == pytest.approx(1.5)

    def test_domains(self):
        with pytest.raises(ValueError):
            F.rhombus(0.5, "B")
        with pytest.raises(ValueError):
            F.rhombus(-1.0, "A")
        with pytest.raises(ValueError):
            F.rhombus_y2(0.2, "C")

    @pytest.mark.parametrize("m,branch", [(-0.8, "A"), (-0.2, "A"), (0.4, "A"), (1.0, "A"),
                                          (-0.8, "B"), (-0.4, "B")])
    def test_printed_eigenvectors(self, m, branch):
        fp = F.rhombus(m, branch)
        y = fp.hat[5]
        C = C_of(fp)
        v1, v2 = F.rhombus_eigenvectors(m, y)
        mu1, mu2 = F.rhombus_mu(m, y * y)
        assert np.max(np.abs(C @ v1 - mu1 * v1)) < 1e-12
        assert np.max(np.abs(C @ v2 - mu2 * v2)) < 1e-12
        # K v is an eigenvector for -mu
        assert np.max(np.abs(C @ apply_K(v1) + mu1 * apply_K(v1))) < 1e-12

    @pytest.mark.parametrize("m", [-0.7, -0.3, 0.5])
    def test_mu_in_y_only(self, m):
        y2 = F.rhombus_y2(m, "A")
        y = math.sqrt(y2)
        mu1, mu2 = F.rhombus_mu(m, y2)
        assert mu1 == pytest.approx((7 * y2 ** 2 - 18 * y2 + 7) / (2 * (y2 + 1) * (3 * y2 - 1)))
        expect = (2 * (y2 - 1) * (y2 + 2 * y - 1) * (y2 - 2 * y - 1)
                  / ((y2 + 1) ** 2 * (3 * y2 - 1)))
        assert mu2 == pytest.approx(expect)

    @pytest.mark.parametrize("m,branch", [(-0.7, "A"), (-0.3, "A"), (0.5, "A"), (-0.5, "B")])
    def test_margins(self, m, branch):
        y2 = F.rhombus_y2(m, branch)
        w = 0.5 + 2 * m / (y2 + 1)
        mu1, mu2 = F.rhombus_mu(m, y2)
        a, b = F.rhombus_margins(y2)
        assert a == pytest.approx(w * w - mu1 * mu1, abs=1e-12)
        assert b == pytest.approx(w * w - mu2 * mu2, abs=1e-12)

    def test_m_orthogonality(self):
        m = -0.35
        fp = F.rhombus(m, "A")
        v1, v2 = F.rhombus_eigenvectors(m, fp.hat[5])
        M = circulation_matrix(fp.circulations)
        for a, b in [(v1, v2), (v1, apply_K(v1)), (v1, apply_K(v2)), (v1, fp.z), (v2, fp.z)]:
            assert abs(a @ M @ b) < 1e-12

    def test_fixed_point_flagged(self):
        fp = F.rhombus(F.M_L_ZERO, "B")
        assert fp.special == "fixed point"
        with pytest.raises(ValueError):
            fp.to_equilibrium()


class TestTrapezoid:
    def test_unit_case(self):
        # sympy: x = 1, y = 2 at m = 1
        assert F.trapezoid_xy(1.0) == pytest.approx((1.0, 2.0))
        assert F.trapezoid(1.0).omega == 0.75

    @pytest.mark.parametrize("m", [0.05, 0.5, 1.0, 3.0, 5.0])
    def test_w1_in_kernel(self, m):
        fp = F.trapezoid(m)
        D = hessian_H(fp.hat, fp.circulations.gamma)
        w1 = F.trapezoid_w1(m)
        assert np.max(np.abs(D @ w1)) < 1e-12
        assert np.max(np.abs(D @ apply_K(w1))) < 1e-12

    @pytest.mark.parametrize("m", [0.05, 0.5, 1.0, 3.0, 5.0])
    def test_w2_eigenvector(self, m):
        fp = F.trapezoid(m)
        w2 = F.trapezoid_w2(m)
        mu2 = (m * m + m + 1) / (2 * (m + 1) * (m + 2))
        assert np.max(np.abs(C_of(fp) @ w2 - mu2 * w2)) < 1e-12

    @given(st.floats(0.01, 5.0))
    def test_second_pair_formula(self, m):
        w = (2 * m + 1) / (2 * m + 2)
        mu2 = (m * m + m + 1) / (2 * (m + 1) * (m + 2))
        L = m * m + 4 * m + 1
        assert math.sqrt(w * w - mu2 * mu2) == pytest.approx(math.sqrt(3 * L) / (2 * (m + 2)),
                                                             rel=1e-12)

    def test_domain(self):
        with pytest.raises(ValueError):
            F.trapezoid(0.0)


class TestRings:
    @pytest.mark.parametrize("n", [3, 4, 7, 10])
    def test_ngon_omega(self, n):
        fp = F.ngon(n)
        assert fp.omega == pytest.approx((n - 1) / 2)
        assert fp.residual() < 1e-12

    def test_one_plus_ngon(self):
        fp = F.ngon(5, gamma0=0.7)
        assert fp.family is F.Family.ONE_PLUS_NGON
        assert fp.omega == pytest.approx(2.7)

    def test_too_small(self):
        with pytest.raises(ValueError):
            F.ngon(2)

    def test_mp_points(self):
        import mpmath
        pts = F.ngon_points_mp(7, 50)
        with mpmath.workdps(50):
            assert abs(pts[1][0] ** 2 + pts[1][1] ** 2 - 1) < mpmath.mpf(10) ** -45

    def test_collinear3(self):
        fp = F.collinear3()
        assert fp.omega == 1.5 and fp.residual() < 1e-15


@pytest.mark.parametrize("fp", [F.triangle(1, 2, -0.7), F.rhombus(-0.4, "A"), F.rhombus(-0.4, "B"),
                                F.trapezoid(2.0)])
def test_analytic_mu_matches_numeric(fp):
    mu = np.sort(np.linalg.eigvals(reduced_matrix(fp.to_equilibrium())).real)
    assert mu == pytest.approx(fp.analytic_mu, abs=1e-10)
