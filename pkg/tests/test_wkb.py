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
from revzeta.core.radial import solve_radial_batch
from revzeta.core.wkb import (
    F,
    SeriesKind,
    U,
    boundary_log_series,
    coefficient_expressions,
    epsilon_derivative_tables,
    evaluate_coefficients,
    log_A_plus,
    log_B_plus,
    s_coefficients,
    total_derivative,
    w_coefficients,
)
from revzeta.numerics.quadrature import QuadratureSpec

TIGHT = QuadratureSpec(abs_tol=1e-13, rel_tol=1e-12)


def cosh_profile():
    return expression_profile(sp.cosh(X - sp.Rational(1, 2)), 0.0, 1.0)


class TestSymbolicCoefficients(unittest.TestCase):
    """Test cases for the symbolic recursion."""

    def test_total_derivative(self):
        self.assertEqual(sp.expand(total_derivative(F[0] ** 2 * F[1])), sp.expand(2 * F[0] * F[1] ** 2 + F[0] ** 2 * F[2]))

    def test_first_s_coefficient(self):
        s_0 = coefficient_expressions(SeriesKind.S_SERIES, 2)[1]
        self.assertEqual(sp.simplify(s_0 + F[1] / (2 * F[0])), 0)

    def test_first_w_coefficient(self):
        w_0 = coefficient_expressions(SeriesKind.W_SERIES, 2)[1]
        expected = -sp.Rational(1, 2) * U ** 2 * F[0] * F[1] / (1 + U ** 2 * F[0] ** 2)
        self.assertEqual(sp.simplify(w_0 - expected), 0)

    def test_order_range(self):
        with self.assertRaises(ValueError):
            coefficient_expressions(SeriesKind.S_SERIES, 0)
        with self.assertRaises(ValueError):
            w_coefficients(constant_profile(1.0, 0.0, 1.0), 3, -1.0)


class TestCoefficientTables(unittest.TestCase):
    """Test cases for the numerical coefficient tables."""

    def test_cylinder_tables(self):
        alpha, u = 0.5, 2.0
        p = constant_profile(alpha, 0.0, 3.0)
        s_table = s_coefficients(p, 4)
        np.testing.assert_allclose(s_table.integrals, [3.0, 0.0, 0.0, 0.0], atol=1e-12)
        w_table = w_coefficients(p, 4, u)
        rho = math.sqrt(1.0 + (u * alpha) ** 2)
        self.assertAlmostEqual(w_table.integral(-1), 3.0 * rho / alpha, delta=1e-10)
        for i in range(0, 3):
            self.assertAlmostEqual(w_table.integral(i), 0.0, delta=1e-12)
        self.assertEqual(w_table.u, u)
        self.assertEqual(w_table.kind, SeriesKind.W_SERIES)

    def test_integral_of_first_coefficients(self):
        p = expression_profile(1 + X / 4, 0.0, 1.0)
        s_table = s_coefficients(p, 3, TIGHT)
        self.assertAlmostEqual(s_table.integral(0), -0.5 * math.log(1.25), delta=1e-11)
        u = 1.5
        w_table = w_coefficients(p, 3, u, TIGHT)
        expected = -0.25 * math.log((1.0 + u ** 2 * 1.25 ** 2) / (1.0 + u ** 2))
        self.assertAlmostEqual(w_table.integral(0), expected, delta=1e-11)

    def test_coefficient_functions_match_evaluation(self):
        p = cosh_profile()
        table = s_coefficients(p, 4)
        x = np.linspace(0.0, 1.0, 9)
        values = evaluate_coefficients(p, SeriesKind.S_SERIES, 4, x)
        self.assertEqual(values.shape, (4, 9))
        for i in range(-1, 3):
            np.testing.assert_allclose(table.coefficient(i)(x), values[i + 1], atol=1e-15)
        np.testing.assert_allclose(table.boundary, values[:, 0], atol=1e-15)

    def test_w_evaluation_shape(self):
        values = evaluate_coefficients(cosh_profile(), SeriesKind.W_SERIES, 3, np.linspace(0.0, 1.0, 5), np.array([0.5, 1.0]))
        self.assertEqual(values.shape, (3, 5, 2))


class TestBoundaryFactors(unittest.TestCase):
    """log A⁺ and log B⁺ against the radial solutions."""

    def test_cylinder_mode_asymptotics(self):
        alpha = 1.0
        cfg = cylinder.CylinderConfig(alpha=alpha, a=0.0, b=1.0)
        p = constant_profile(alpha, 0.0, 1.0)
        u = np.array([0.5, 1.0, 2.0])
        k = 30.0
        rho = np.sqrt(1.0 + (u * alpha) ** 2)
        approximation = log_B_plus(p, k, u, 4) + k * rho / alpha
        np.testing.assert_allclose(approximation, cylinder.closed_log_Xk(cfg, k, u), atol=1e-12)

    def test_zero_mode_asymptotics(self):
        p = cosh_profile()
        N = 5
        table = s_coefficients(p, N, TIGHT)
        lam = 60.0
        expected = float(solve_radial_batch(p, 0, np.array([lam]), rtol=1e-12).log_X[0])
        approximation = log_A_plus(p, lam, N) + sum(lam ** (-i) * table.integral(i) for i in range(-1, N - 1))
        self.assertAlmostEqual(approximation, expected, delta=1e-5)

    def test_expanded_boundary_factor(self):
        p = cosh_profile()
        boundary = evaluate_coefficients(p, SeriesKind.S_SERIES, 4, np.array([p.a]))[:, 0]
        t = np.array([100.0, 200.0])
        np.testing.assert_allclose(boundary_log_series(boundary, t, 4), log_A_plus(p, t, 4), atol=1e-7)
        np.testing.assert_allclose(boundary_log_series(boundary, t, 2), -np.log(2.0 * t * boundary[0]), atol=1e-15)

    def test_scalar_shapes(self):
        p = cosh_profile()
        self.assertIsInstance(log_A_plus(p, 10.0, 4), float)
        self.assertIsInstance(log_B_plus(p, 5, 1.0, 4), float)
        self.assertEqual(np.shape(log_B_plus(p, 5, np.array([0.5, 1.0]), 4)), (2,))


class TestEpsilonTables(unittest.TestCase):
    """Exact ε-derivatives against central differences of the coefficient integrals."""

    def setUp(self):
        self.p = cosh_profile()
        self.bump = make_gaussian_bump(0.5, 0.2)
        self.eps = 1e-4

    def _difference(self, build):
        plus = build(perturbed_profile(self.p, self.bump, self.eps))
        minus = build(perturbed_profile(self.p, self.bump, -self.eps))
        return (np.array(plus.integrals) - np.array(minus.integrals)) / (2.0 * self.eps)

    def test_s_tables(self):
        table = epsilon_derivative_tables(self.p, self.bump, 4, spec=TIGHT)
        self.assertTrue(table.epsilon)
        expected = self._difference(lambda q: s_coefficients(q, 4, TIGHT))
        np.testing.assert_allclose(table.integrals, expected, rtol=1e-5, atol=1e-6)

    def test_w_tables(self):
        u = 0.7
        table = epsilon_derivative_tables(self.p, self.bump, 4, u=u, spec=TIGHT)
        self.assertEqual(table.u, u)
        expected = self._difference(lambda q: w_coefficients(q, 4, u, TIGHT))
        np.testing.assert_allclose(table.integrals, expected, rtol=1e-5, atol=1e-6)

    def test_boundary_is_untouched(self):
        table = epsilon_derivative_tables(self.p, self.bump, 4, u=1.0)
        np.testing.assert_array_equal(table.boundary, np.zeros(4))


if __name__ == "__main__":
    unittest.main()
