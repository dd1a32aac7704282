import math
import os
import sys
import unittest

import numpy as np
import sympy as sp

# Add parent directory to path to import revzeta modules
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from revzeta.core import cylinder
from revzeta.core.profile import X, constant_profile, expression_profile, make_gaussian_bump, perturbed_profile
from revzeta.core.radial import (
    LogScaledValue,
    RadialProblem,
    derive_G,
    growth_exponent,
    solve_X,
    solve_perturbation_ratio,
    solve_radial_batch,
    taylor_coefficients,
)


class TestLogScaledValue(unittest.TestCase):
    """Test cases for sign/log-magnitude values."""

    def test_round_trip(self):
        value = LogScaledValue.from_float(-2.5)
        self.assertEqual(value.sign, -1)
        self.assertAlmostEqual(value.value, -2.5, delta=1e-14)

    def test_zero(self):
        value = LogScaledValue.from_float(0.0)
        self.assertEqual(value.sign, 0)
        self.assertEqual(value.value, 0.0)


class TestCylinderSolutions(unittest.TestCase):
    """Radial solutions on the cylinder against the closed forms."""

    def setUp(self):
        self.cfg = cylinder.CylinderConfig(alpha=1.0, a=0.0, b=1.0)
        self.p = constant_profile(1.0, 0.0, 1.0)
        self.lam = np.array([0.1, 1.0, 10.0, 50.0])

    def test_log_X_matches_closed_form(self):
        for k in range(0, 21):
            batch = solve_radial_batch(self.p, k, self.lam)
            if k == 0:
                expected = cylinder.closed_log_X0(self.cfg, self.lam)
            else:
                expected = cylinder.closed_log_Xk(self.cfg, k, self.lam / k)
            np.testing.assert_allclose(batch.log_X, expected, rtol=0.0, atol=1e-8, err_msg=f"k={k}")
            np.testing.assert_array_equal(batch.sign, np.ones(self.lam.size, dtype=int))

    def test_growth_exponent(self):
        growth = growth_exponent(self.p, 3.0, self.lam)
        np.testing.assert_allclose(growth, np.sqrt(self.lam ** 2 + 9.0), rtol=1e-12)

    def test_single_problem(self):
        value = solve_X(RadialProblem(self.p, 3, 5.0))
        expected = float(cylinder.closed_log_Xk(self.cfg, 3, 5.0 / 3.0)[0])
        self.assertEqual(value.sign, 1)
        self.assertAlmostEqual(value.log_magnitude, expected, delta=1e-8)

    def test_wider_cylinder(self):
        cfg = cylinder.CylinderConfig(alpha=0.5, a=0.0, b=2.0)
        p = constant_profile(0.5, 0.0, 2.0)
        batch = solve_radial_batch(p, 4, np.array([0.5, 8.0]))
        expected = cylinder.closed_log_Xk(cfg, 4, np.array([0.5, 8.0]) / 4.0)
        np.testing.assert_allclose(batch.log_X, expected, rtol=0.0, atol=1e-8)


class TestPerturbationRatio(unittest.TestCase):
    """The augmented system against the closed-form ratios and finite differences."""

    def setUp(self):
        self.cfg = cylinder.CylinderConfig(alpha=1.0, a=0.0, b=1.0)
        self.p = constant_profile(1.0, 0.0, 1.0)
        self.bump = make_gaussian_bump(0.5, 0.3)

    def test_zero_mode(self):
        lam = np.array([0.2, 1.0, 3.0])
        batch = solve_radial_batch(self.p, 0, lam, bump=self.bump)
        np.testing.assert_allclose(batch.ratio, cylinder.ratio0(self.cfg, self.bump, lam), rtol=1e-7)

    def test_higher_modes(self):
        u = np.array([0.2, 1.0, 3.0])
        for k in (1, 3, 6):
            batch = solve_radial_batch(self.p, k, u * k, bump=self.bump)
            expected = cylinder.ratiok(self.cfg, self.bump, k, u)
            np.testing.assert_allclose(batch.ratio, expected, rtol=1e-7, err_msg=f"k={k}")

    def test_off_centre_bump(self):
        bump = make_gaussian_bump(0.3, 0.2)
        ratio = solve_perturbation_ratio(RadialProblem(self.p, 2, 4.0), bump)
        expected = float(cylinder.ratiok(self.cfg, bump, 2, np.array([2.0]))[0])
        self.assertAlmostEqual(ratio / expected, 1.0, delta=1e-7)

    def test_ratio_ignores_initial_scale(self):
        rp = RadialProblem(self.p, 2, 1.5)
        self.assertAlmostEqual(
            solve_perturbation_ratio(rp, self.bump, scale=1e-3),
            solve_perturbation_ratio(rp, self.bump),
            delta=1e-10,
        )

    def test_ratio_is_logarithmic_derivative(self):
        p = expression_profile(sp.cosh(X - sp.Rational(1, 2)), 0.0, 1.0)
        bump = make_gaussian_bump(0.5, 0.2)
        eps = 1e-4
        k, lam = 2, 3.0
        plus = solve_X(RadialProblem(perturbed_profile(p, bump, eps), k, lam))
        minus = solve_X(RadialProblem(perturbed_profile(p, bump, -eps), k, lam))
        difference = (plus.log_magnitude - minus.log_magnitude) / (2.0 * eps)
        ratio = solve_perturbation_ratio(RadialProblem(p, k, lam), bump)
        self.assertAlmostEqual(ratio / difference, 1.0, delta=1e-5)

    def test_no_bump_support_means_zero_ratio(self):
        batch = solve_radial_batch(self.p, 1, np.array([1.0]), bump=self.bump.scaled(0.0))
        np.testing.assert_array_equal(batch.ratio, np.zeros(1))


class TestDeriveG(unittest.TestCase):
    """The ε-coefficient of the radial operator."""

    def test_cylinder_coefficients(self):
        alpha, k = 0.8, 3.0
        p = constant_profile(alpha, 0.0, 1.0)
        bump = make_gaussian_bump(0.5, 0.3)
        G = derive_G(p, bump, k, 2.0)
        x = np.linspace(0.25, 0.75, 11)
        np.testing.assert_allclose(G.first(x), bump.g_prime(x) / alpha, atol=1e-13)
        np.testing.assert_allclose(G.zeroth(x), 2.0 * k ** 2 * bump.g(x) / alpha ** 3, atol=1e-12)
        x1, x0 = np.full(11, 2.0), np.full(11, -1.0)
        np.testing.assert_allclose(G(np.zeros(11), x1, x0, x), 2.0 * G.first(x) - G.zeroth(x), atol=1e-13)

    def test_vanishes_outside_support(self):
        p = expression_profile(1 + X / 4, 0.0, 1.0)
        G = derive_G(p, make_gaussian_bump(0.5, 0.2), 2.0, 1.0)
        x = np.array([0.0, 0.1, 0.9, 1.0])
        np.testing.assert_array_equal(G.first(x), np.zeros(4))
        np.testing.assert_array_equal(G.zeroth(x), np.zeros(4))


class TestTaylorCoefficients(unittest.TestCase):
    """Small-z expansion of log X on the cylinder."""

    def test_cylinder_coefficients(self):
        p = constant_profile(1.0, 0.0, 1.0)
        coefficients = taylor_coefficients(p, np.array([0.0, 2.0]), 2)
        self.assertEqual(coefficients.shape, (2, 3))
        self.assertAlmostEqual(coefficients[0, 0], 0.0, delta=1e-15)
        self.assertAlmostEqual(coefficients[0, 1], -1.0 / 6.0, delta=1e-8)
        self.assertAlmostEqual(coefficients[0, 2], -1.0 / 180.0, delta=1e-8)
        expected = -(1.0 / math.tanh(2.0) - 0.5) / 4.0
        self.assertAlmostEqual(coefficients[1, 1], expected, delta=1e-8)


if __name__ == "__main__":
    unittest.main()
