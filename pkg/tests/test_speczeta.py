import math
import os
import sys
import unittest

import mpmath
import numpy as np
import pytest
import sympy as sp
from pydantic import ValidationError

# Add parent directory to path to import revzeta modules
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from revzeta.core.errors import ConfigError
from revzeta.core.profile import X, constant_profile, expression_profile, make_gaussian_bump, make_mixed_gaussian_bump
from revzeta.core.speczeta import (
    DELTA_TERM_NAMES,
    ZETA_PRIME_MINUS_2,
    AsymptoticSubtraction,
    EnergyChangeResult,
    EvaluationPoint,
    TermValue,
    ZetaDecomposition,
    a0_terms_from_tables,
    a_terms_det,
    a_terms_energy,
    casimir_energy,
    consolidated_delta_terms,
    delta_a_terms,
    delta_energy,
    delta_energy_cylinder,
    functional_determinant,
    residue_at_minus_half,
    z0_prime_zero,
    zneq_prime_zero,
)
from revzeta.core.wkb import SeriesKind, asymptotic_remainder, coefficient_integrals, evaluate_coefficients
from revzeta.numerics.quadrature import QuadratureSpec

CONE = expression_profile(1 + X / 4, 0.0, 1.0)
COSH = expression_profile(sp.cosh(X - sp.Rational(1, 2)), 0.0, 1.0)
CYLINDER = constant_profile(1.0, 0.0, 1.0)


class TestConstants(unittest.TestCase):
    """Test cases for the Riemann zeta constants."""

    def test_zeta_prime_at_minus_two(self):
        mpmath.mp.dps = 30
        self.assertAlmostEqual(ZETA_PRIME_MINUS_2, float(mpmath.zeta(-2, 1, 1)), delta=1e-16)
        self.assertAlmostEqual(ZETA_PRIME_MINUS_2, -float(mpmath.zeta(3)) / (4.0 * math.pi ** 2), delta=1e-16)


class TestAsymptoticTerms(unittest.TestCase):
    """Test cases for the A-terms and the residue at s = -1/2."""

    def test_first_order_residues_cancel(self):
        for p in (CYLINDER, CONE, COSH):
            terms = a_terms_energy(p)
            self.assertAlmostEqual(terms.A0_terms[1].residue + terms.Aneq_terms[1].residue, 0.0, delta=1e-14)

    def test_cylinder_has_no_residue(self):
        self.assertEqual(residue_at_minus_half(CYLINDER), 0.0)
        terms = a_terms_energy(constant_profile(2.0, 0.0, 3.0))
        self.assertAlmostEqual(terms.A0_terms[-1].finite_part, 3.0 / (2.0 * math.pi), delta=1e-12)
        self.assertAlmostEqual(terms.Aneq_terms[0].finite_part, 1.0 / 24.0, delta=1e-15)

    def test_cone_residue(self):
        Q = 1.0 + 0.25 ** 2
        expected = -(0.25 ** 2 / Q) * (1.0 + 1.0 / 1.25) / 256.0
        self.assertAlmostEqual(residue_at_minus_half(CONE), expected, delta=1e-14)

    def test_cosh_residue(self):
        c, s = math.cosh(0.5), math.sinh(0.5)
        expected = -2.0 * s ** 2 / c ** 3 / 256.0 - 2.0 / c ** 3 / 32.0
        self.assertAlmostEqual(residue_at_minus_half(COSH), expected, delta=1e-14)

    def test_determinant_terms_on_the_cylinder(self):
        alpha, L = 0.5, 2.0
        terms = a_terms_det(constant_profile(alpha, 0.0, L))
        self.assertAlmostEqual(terms.A0_terms[-1].finite_part, -L, delta=1e-12)
        self.assertAlmostEqual(terms.A0_terms[1].finite_part, 0.0, delta=1e-15)
        self.assertAlmostEqual(terms.Aneq_terms[-1].finite_part, L / (6.0 * alpha), delta=1e-12)
        self.assertAlmostEqual(terms.Aneq_terms[0].finite_part, 0.5 * math.log(4.0 * math.pi * alpha ** 2), delta=1e-14)

    def test_table_terms_match_closed_forms(self):
        for p in (CYLINDER, CONE, COSH):
            for at, closed in (
                (EvaluationPoint.DET_POINT, a_terms_det(p).A0_terms),
                (EvaluationPoint.ENERGY_POINT, a_terms_energy(p).A0_terms),
            ):
                raw = a0_terms_from_tables(p, at)
                for i in (-1, 0):
                    self.assertAlmostEqual(raw[i].finite_part, closed[i].finite_part, delta=1e-10, msg=f"{at.value} {i}")
                    self.assertEqual(raw[i].residue, closed[i].residue)

    def test_table_terms_on_the_cylinder(self):
        p = constant_profile(0.5, 0.0, 2.0)
        for at, closed in (
            (EvaluationPoint.DET_POINT, a_terms_det(p).A0_terms),
            (EvaluationPoint.ENERGY_POINT, a_terms_energy(p).A0_terms),
        ):
            raw = a0_terms_from_tables(p, at)
            self.assertEqual(sorted(raw), sorted(closed))
            for i in raw:
                self.assertAlmostEqual(raw[i].finite_part, closed[i].finite_part, delta=1e-10, msg=f"{at.value} {i}")
                self.assertAlmostEqual(raw[i].residue, closed[i].residue, delta=1e-12, msg=f"{at.value} {i}")


class TestDeltaATerms(unittest.TestCase):
    """Test cases for the ε-derivatives of the A-terms."""

    def setUp(self):
        self.bump = make_gaussian_bump(0.5, 0.2)

    def test_all_terms_reported(self):
        terms = delta_a_terms(COSH, self.bump)
        self.assertEqual(tuple(terms.terms), DELTA_TERM_NAMES)
        for name in ("dA0_0", "dA0_2", "dAneq_0", "dRes_Aneq_2"):
            self.assertEqual(terms.terms[name], 0.0)

    def test_residue_derivatives_cancel(self):
        for p in (COSH, CONE):
            terms = delta_a_terms(p, self.bump).terms
            self.assertAlmostEqual(terms["dRes_A0_1"] + terms["dRes_Aneq_1"], 0.0, delta=1e-14)

    def test_consolidated_forms_agree(self):
        for p in (COSH, CONE):
            for bump in (self.bump, make_mixed_gaussian_bump(0.4, 0.3)):
                printed = delta_a_terms(p, bump).terms
                consolidated = consolidated_delta_terms(p, bump)
                for name, value in consolidated.items():
                    self.assertAlmostEqual(printed[name], value, delta=1e-8, msg=f"{p.label} {name}")

    def test_cylinder_terms(self):
        alpha = 0.8
        terms = delta_a_terms(constant_profile(alpha, 0.0, 1.0), self.bump).terms
        total = float(mpmath.quad(lambda t: float(self.bump.g(np.array([float(t)]))[0]), [0.3, 0.5, 0.7]))
        expected = -2.0 * ZETA_PRIME_MINUS_2 / (math.pi * alpha ** 3) * total
        self.assertAlmostEqual(terms["dAneq_-1"], expected, delta=1e-9)
        for name in ("dA0_-1", "dFP_Aneq_2", "dRes_A0_1", "dRes_Aneq_1"):
            self.assertAlmostEqual(terms[name], 0.0, delta=1e-10)


class TestLedgerModels(unittest.TestCase):
    """Test cases for the consistency checks of the result models."""

    def test_energy_change_must_equal_its_terms(self):
        with self.assertRaises(ValidationError):
            EnergyChangeResult(delta_E=1.0, term_breakdown={"dZ0": 0.5}, K_used=1, tail_bound=0.0)
        result = EnergyChangeResult.from_terms({"dZ0": 0.25, "dZneq": -0.5}, K_used=3, tail_bound=1e-9)
        self.assertAlmostEqual(result.delta_E, -0.25)

    def test_no_residues_at_zero(self):
        with self.assertRaises(ValidationError):
            ZetaDecomposition(
                at=EvaluationPoint.DET_POINT,
                A0_terms={1: TermValue(finite_part=0.0, residue=1.0)},
                Aneq_terms={},
                Z0=0.0,
                Zneq=0.0,
                K_used=1,
            )

    def test_uncancelled_residues(self):
        with self.assertRaises(ValidationError):
            ZetaDecomposition(
                at=EvaluationPoint.ENERGY_POINT,
                A0_terms={1: TermValue(finite_part=0.0, residue=1.0)},
                Aneq_terms={1: TermValue(finite_part=0.0, residue=-0.5)},
                Z0=0.0,
                Zneq=0.0,
                K_used=1,
            )


class TestSubtraction(unittest.TestCase):
    """Test cases for the subtracted radial data."""

    def test_remainder_decays(self):
        N = 4
        sub = AsymptoticSubtraction(CONE, N)
        lam = np.array([10.0, 40.0])
        values = sub.radial(lam, asymptotics=False, rtol=1e-12)
        self.assertTrue(abs(values[1]) < abs(values[0]) / 8.0 or abs(values[1]) < 1e-9)

        integrals, _ = coefficient_integrals(CONE, SeriesKind.S_SERIES, N + 2, spec=QuadratureSpec(abs_tol=1e-13, rel_tol=1e-12))
        boundary = evaluate_coefficients(CONE, SeriesKind.S_SERIES, N + 2, np.array([0.0]))[:, 0]
        predicted = asymptotic_remainder(integrals, boundary, lam[1], N)
        self.assertAlmostEqual(values[1], float(predicted), delta=1e-6)

    def test_mode_remainder_decays(self):
        sub = AsymptoticSubtraction(CONE, 4)
        u = np.array([0.5])
        near, far = (abs(float(sub.mode(k, u, asymptotics=False, rtol=1e-12)[0])) for k in (10.0, 40.0))
        self.assertTrue(far < near / 8.0 or far < 1e-9)

    def test_switch_matches_solution(self):
        sub = AsymptoticSubtraction(CONE, 4)
        lam = np.array([80.0])
        self.assertAlmostEqual(float(sub.radial(lam)[0]), float(sub.radial(lam, asymptotics=False, rtol=1e-12)[0]),
                               delta=1e-7)


class TestZTerms(unittest.TestCase):
    """Z-terms of the determinant on the cylinder, where they have closed forms."""

    def test_zero_mode(self):
        self.assertAlmostEqual(z0_prime_zero(CYLINDER).value, 1.0 - math.log(2.0), delta=1e-9)
        L = 2.5
        self.assertAlmostEqual(z0_prime_zero(constant_profile(1.0, 0.0, L)).value, L - math.log(2.0 * L), delta=1e-9)

    def test_higher_modes(self):
        k = np.arange(1, 200, dtype=float)
        expected = -2.0 * float(np.sum(np.log1p(-np.exp(-2.0 * k))))
        result = zneq_prime_zero(CYLINDER)
        self.assertAlmostEqual(result.value, expected, delta=2e-7)
        self.assertGreaterEqual(result.K_used, 1)

    def test_fixed_truncation(self):
        result = zneq_prime_zero(CYLINDER, K=5)
        expected = -2.0 * sum(math.log1p(-math.exp(-2.0 * k)) for k in range(1, 6))
        self.assertEqual(result.K_used, 5)
        self.assertAlmostEqual(result.value, expected, delta=1e-8)


class TestLedgers(unittest.TestCase):
    """End-to-end ledgers."""

    def test_determinant(self):
        result = functional_determinant(CONE)
        self.assertEqual(result.log_det, -result.zeta_prime)
        self.assertAlmostEqual(result.det, math.exp(-result.zeta_prime), delta=1e-12 * result.det)
        self.assertAlmostEqual(result.zeta_prime, result.decomposition.finite_total, delta=1e-15)
        self.assertAlmostEqual(result.decomposition.raw_A0_terms[-1].finite_part,
                               result.decomposition.A0_terms[-1].finite_part, delta=1e-9)

    @pytest.mark.slow
    def test_cylinder_energy_is_finite(self):
        result = casimir_energy(CYLINDER)
        self.assertEqual(result.residue, 0.0)
        self.assertTrue(math.isfinite(result.energy))
        self.assertLessEqual(result.decomposition.tail_bound, 1e-6)

    @pytest.mark.slow
    def test_energy_change_routes_agree(self):
        bump = make_gaussian_bump(0.5, 0.3)
        closed = delta_energy_cylinder(1.0, 0.0, 1.0, bump)
        radial = delta_energy(CYLINDER, bump)
        self.assertEqual(set(closed.term_breakdown), set(radial.term_breakdown))
        self.assertAlmostEqual(radial.delta_E, closed.delta_E, delta=1e-5)

    def test_bump_must_vanish_at_the_ends(self):
        with self.assertRaises(ConfigError):
            delta_energy_cylinder(1.0, 0.0, 1.0, make_gaussian_bump(0.1, 0.3))


class TestEnergyChangeShapes(unittest.TestCase):
    """Shape of ΔE(c) along sweeps on the cylinder."""

    @pytest.mark.slow
    def test_unit_interval_is_attractive(self):
        for delta in (0.1, 0.3):
            centres = [delta, 0.5]
            values = [delta_energy_cylinder(1.0, 0.0, 1.0, make_gaussian_bump(c, delta)).delta_E for c in centres]
            self.assertTrue(all(v < 0.0 for v in values), msg=f"delta={delta}: {values}")
        edge = delta_energy_cylinder(1.0, 0.0, 1.0, make_gaussian_bump(0.1, 0.1)).delta_E
        middle = delta_energy_cylinder(1.0, 0.0, 1.0, make_gaussian_bump(0.5, 0.1)).delta_E
        self.assertGreater(abs(edge), abs(middle))

    @pytest.mark.slow
    def test_mixed_bump_is_antisymmetric(self):
        spec = QuadratureSpec(abs_tol=1e-10, rel_tol=1e-10)
        values = {c: delta_energy_cylinder(1.0, 0.0, 1.0, make_mixed_gaussian_bump(c, 0.2), spec=spec).delta_E
                  for c in (0.3, 0.5, 0.7)}
        scale = max(abs(v) for v in values.values())
        self.assertLess(abs(values[0.5]), 1e-6 * scale)
        self.assertAlmostEqual(values[0.3], -values[0.7], delta=1e-8)

    @pytest.mark.slow
    def test_long_cylinder_changes_sign(self):
        values = [delta_energy_cylinder(1.0, 0.0, 20.0, make_gaussian_bump(c, 0.3)).delta_E for c in (1.0, 10.0)]
        self.assertLess(values[0] * values[1], 0.0)

    @pytest.mark.slow
    def test_very_long_cylinder_centre(self):
        self.assertGreater(delta_energy_cylinder(1.0, 0.0, 100.0, make_gaussian_bump(50.0, 0.3)).delta_E, 0.0)


if __name__ == "__main__":
    unittest.main()
