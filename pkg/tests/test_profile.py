import os
import sys
import unittest

import mpmath
import numpy as np
import sympy as sp

# Add parent directory to path to import revzeta modules
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from revzeta.core.errors import ConfigError, DifferentiationFailure, PositivityViolation
from revzeta.core.profile import (
    X,
    bump_edge_residual,
    callable_profile,
    constant_profile,
    expression_profile,
    make_bump,
    make_gaussian_bump,
    make_mixed_gaussian_bump,
    perturbed_profile,
    validate_profile,
)
from revzeta.numerics.quadrature import QuadratureSpec, adaptive_quad

TIGHT = QuadratureSpec(abs_tol=1e-12, rel_tol=1e-10)


def reference_bump(c, delta):
    """Arbitrary-precision g for the Gaussian bump."""
    def g(x):
        t = x - c
        if abs(t) >= delta:
            return mpmath.mpf(0)
        return mpmath.exp(-(t / (t ** 2 - delta ** 2)) ** 2)
    return g


class TestGaussianBump(unittest.TestCase):
    """Test cases for the compactly supported Gaussian bump."""

    def setUp(self):
        mpmath.mp.dps = 40
        self.bump = make_gaussian_bump(0.5, 0.3)

    def test_centre_and_edges(self):
        self.assertEqual(float(self.bump.g(np.array([0.5]))[0]), 1.0)
        np.testing.assert_array_equal(self.bump.g(np.array([0.2, 0.8, 0.0, 1.0])), np.zeros(4))
        np.testing.assert_allclose(self.bump.support, (0.2, 0.8), atol=1e-15)

    def test_value_against_arbitrary_precision(self):
        bump = make_gaussian_bump(0.5, 0.1)
        expected = float(reference_bump(mpmath.mpf("0.5"), mpmath.mpf("0.1"))(mpmath.mpf("0.55")))
        value = float(bump.g(np.array([0.55]))[0])
        self.assertGreater(expected, 0.0)
        self.assertAlmostEqual(value / expected, 1.0, delta=1e-11)

    def test_derivatives_against_arbitrary_precision(self):
        g = reference_bump(mpmath.mpf("0.5"), mpmath.mpf("0.3"))
        for x in (0.35, 0.6, 0.71):
            for n, fn in enumerate((self.bump.g, self.bump.g_prime, self.bump.g_double_prime)):
                expected = float(mpmath.diff(g, mpmath.mpf(x), n))
                value = float(fn(np.array([x]))[0])
                self.assertAlmostEqual(value, expected, delta=1e-9 * max(1.0, abs(expected)))

    def test_vanishes_outside_support(self):
        for residual in bump_edge_residual(self.bump).values():
            self.assertLess(residual, 1e-12)

    def test_integral_of_derivative(self):
        value, _ = adaptive_quad(self.bump.g_prime, 0.2, 0.8, TIGHT)
        self.assertLess(abs(value), 1e-10)

    def test_invalid_width(self):
        with self.assertRaises(ValueError):
            make_gaussian_bump(0.5, 0.0)
        with self.assertRaises(ConfigError):
            make_bump("triangle", 0.5, 0.1)


class TestMixedBump(unittest.TestCase):
    """Test cases for the odd two-lobe bump."""

    def setUp(self):
        self.c, self.delta = 0.5, 0.3
        self.bump = make_mixed_gaussian_bump(self.c, self.delta)

    def test_lobe_centres(self):
        values = self.bump.g(np.array([self.c, self.c - self.delta / 2, self.c + self.delta / 2]))
        np.testing.assert_allclose(values, [0.0, 1.0, -1.0], atol=1e-15)

    def test_odd_symmetry(self):
        t = np.linspace(0.01, self.delta, 37)
        np.testing.assert_allclose(self.bump.g(self.c + t) + self.bump.g(self.c - t), 0.0, atol=1e-13)

    def test_zero_mean(self):
        value, _ = adaptive_quad(self.bump.g, self.c - self.delta, self.c + self.delta, TIGHT, min_panels=4)
        self.assertLess(abs(value), 1e-10)

    def test_reflection(self):
        bump = make_mixed_gaussian_bump(0.3, 0.2)
        mirrored = bump.reflected(0.0, 1.0)
        x = np.linspace(0.0, 1.0, 101)
        np.testing.assert_allclose(mirrored.g(x), bump.g(1.0 - x), atol=1e-14)
        self.assertAlmostEqual(mirrored.c, 0.7)


class TestProfiles(unittest.TestCase):
    """Test cases for profile construction, perturbation and validation."""

    def setUp(self):
        self.cylinder = constant_profile(1.0, 0.0, 1.0)
        self.bump = make_gaussian_bump(0.5, 0.3)

    def test_constant_profile(self):
        x = np.linspace(0.0, 1.0, 11)
        np.testing.assert_array_equal(self.cylinder.f(x), np.ones(11))
        np.testing.assert_array_equal(self.cylinder.derivative(4)(x), np.zeros(11))
        self.assertTrue(self.cylinder.has_exact_jets)

    def test_expression_derivatives_are_exact(self):
        p = expression_profile(sp.cosh(X - sp.Rational(1, 2)), 0.0, 1.0)
        x = np.linspace(0.0, 1.0, 7)
        np.testing.assert_allclose(p.derivative(3)(x), np.sinh(x - 0.5), rtol=1e-14, atol=1e-15)
        np.testing.assert_allclose(p.jets(x, 4)[4], np.cosh(x - 0.5), rtol=1e-14)

    def test_callable_profile_difference_fallback(self):
        p = callable_profile(lambda x: np.cosh(x - 0.5), lambda x: np.sinh(x - 0.5), lambda x: np.cosh(x - 0.5),
                             0.0, 1.0)
        x = np.linspace(0.1, 0.9, 9)
        np.testing.assert_allclose(p.derivative(3)(x), np.sinh(x - 0.5), atol=1e-7)
        np.testing.assert_allclose(p.derivative(4)(x), np.cosh(x - 0.5), atol=1e-5)
        with self.assertRaises(DifferentiationFailure):
            p.derivative(5)

    def test_zero_perturbation_is_identity(self):
        p = perturbed_profile(self.cylinder, self.bump, 0.0)
        x = np.linspace(0.0, 1.0, 101)
        np.testing.assert_array_equal(p.f(x), self.cylinder.f(x))
        self.assertEqual((p.a, p.b), (0.0, 1.0))

    def test_perturbation_adds_the_bump(self):
        p = perturbed_profile(self.cylinder, self.bump, 0.1)
        self.assertAlmostEqual(float(p.f(np.array([0.5]))[0]), 1.1, delta=1e-15)
        x = np.linspace(0.25, 0.75, 9)
        np.testing.assert_allclose(p.derivative(3)(x), 0.1 * self.bump.derivative(3)(x), atol=1e-12)

    def test_perturbations_compose(self):
        once = perturbed_profile(self.cylinder, self.bump, 0.07)
        twice = perturbed_profile(perturbed_profile(self.cylinder, self.bump, 0.03), self.bump, 0.04)
        x = np.linspace(0.0, 1.0, 201)
        np.testing.assert_allclose(twice.f(x), once.f(x), atol=1e-14, rtol=0.0)

    def test_positivity_violation(self):
        with self.assertRaises(PositivityViolation):
            perturbed_profile(self.cylinder, self.bump, -2.0)

    def test_bump_outside_interval(self):
        with self.assertRaises(ConfigError):
            perturbed_profile(self.cylinder, make_gaussian_bump(0.9, 0.3), 0.1)

    def test_validate_consistent_profile(self):
        report = validate_profile(self.cylinder)
        self.assertTrue(report.ok)
        self.assertTrue(report.positive)
        self.assertTrue(report.derivatives_consistent)
        self.assertTrue(validate_profile(expression_profile(sp.cosh(X - 0.5), 0.0, 1.0)).ok)

    def test_validate_flags_inconsistent_derivative(self):
        p = callable_profile(lambda x: 1.0 + x, np.zeros_like, np.zeros_like, 0.0, 1.0)
        report = validate_profile(p)
        self.assertTrue(report.positive)
        self.assertFalse(report.derivatives_consistent)
        self.assertFalse(report.ok)

    def test_validate_is_relative_for_small_profiles(self):
        slope = 1e-3 * (1.0 + 1e-4)
        p = callable_profile(lambda x: 1e-3 * (1.0 + x), lambda x: np.full_like(x, slope), np.zeros_like, 0.0, 1.0)
        report = validate_profile(p)
        self.assertFalse(report.derivatives_consistent)
        self.assertAlmostEqual(report.first_derivative_residual, 5e-5, delta=1e-6)

    def test_validate_accepts_large_offset(self):
        p = callable_profile(lambda x: 100.0 + 1e-3 * x, lambda x: np.full_like(x, 1e-3), np.zeros_like, 0.0, 1.0)
        report = validate_profile(p)
        self.assertTrue(report.derivatives_consistent)
        self.assertLess(report.first_derivative_residual, 1e-8)

    def test_validate_flags_sign_change(self):
        report = validate_profile(expression_profile(X - sp.Rational(1, 2), 0.0, 1.0))
        self.assertFalse(report.positive)
        self.assertLessEqual(report.min_value, 0.0)
        self.assertTrue(report.derivatives_consistent)


if __name__ == "__main__":
    unittest.main()
