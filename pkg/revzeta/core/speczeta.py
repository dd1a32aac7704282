"""
Zeta-function ledger of the Dirichlet Laplacian on a surface of revolution.

ζ(s) splits into finite Z-terms, computed from the radial solutions with their
large-parameter behaviour removed, and asymptotic A-terms with closed forms in
f. The ledger is assembled at s = 0 (ζ'(0), hence the functional determinant)
and at s = -1/2 (Casimir energy and its residue). The ε-derivatives of both
families at s = -1/2 give the first-order energy change ΔE caused by a bump
f -> f + εg.

The λ d/dλ and u d/du forms of the Z-terms are always integrated by parts, so
no radial solution is ever differentiated numerically.
"""
import logging
import math
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator
from scipy.special import zeta as riemann_zeta

from revzeta.config import (
    ASYMPTOTIC_SWITCH,
    DETERMINANT_ORDER,
    ENERGY_ORDER,
    ODE_RTOL,
    SWITCH_FRACTION,
    TAIL_FRACTION,
)
from revzeta.core import cylinder
from revzeta.core.errors import ConfigError
from revzeta.core.profile import BumpSpec, ProfileSpec
from revzeta.core.radial import edge_exponents, solve_radial_batch
from revzeta.core.wkb import (
    SeriesKind,
    asymptotic_remainder,
    boundary_log_series,
    coefficient_integrals,
    epsilon_integrals,
    epsilon_remainder,
    evaluate_coefficients,
    remainder_coefficients,
    remainder_last_order,
)
from revzeta.numerics.quadrature import QuadratureSpec, adaptive_quad, improper_quad
from revzeta.numerics.series import integral_tail, series_with_tail

logger = logging.getLogger(__name__)

# ζ_R'(-2) = -ζ(3)/(4π²)
ZETA_PRIME_MINUS_2 = -0.030448457058393270780

# Tightening of the coefficient tables, of the per-mode integrals and of the A-term integrals
TABLE_TIGHTENING = 1e3
MODE_TIGHTENING = 10.0
TERM_TIGHTENING = 1e4

DELTA_TERM_NAMES = (
    "dA0_-1",
    "dA0_0",
    "dRes_A0_1",
    "dA0_2",
    "dAneq_-1",
    "dAneq_0",
    "dRes_Aneq_1",
    "dRes_Aneq_2",
    "dFP_Aneq_2",
)

JetIntegrand = Callable[[np.ndarray, Optional[np.ndarray]], np.ndarray]


class EvaluationPoint(str, Enum):
    DET_POINT = "DET_POINT"
    ENERGY_POINT = "ENERGY_POINT"


class TermValue(BaseModel):
    """Finite part and residue of one asymptotic term at the evaluation point."""

    finite_part: float
    residue: float = 0.0


class ZTerm(BaseModel):
    """A finite Z-term with its error budget."""

    value: float
    error: float = Field(default=0.0, ge=0)
    K_used: int = Field(default=1, ge=1)
    tail_bound: float = Field(default=0.0, ge=0)


class AsymptoticTerms(BaseModel):
    """Printed A-terms of the k = 0 and k ≠ 0 sectors, keyed by the order i."""

    A0_terms: Dict[int, TermValue]
    Aneq_terms: Dict[int, TermValue]
    errors: Dict[str, float] = Field(default_factory=dict)


class ZetaDecomposition(BaseModel):
    """Full ledger of Z-terms and A-terms at one evaluation point."""

    at: EvaluationPoint
    A0_terms: Dict[int, TermValue]
    Aneq_terms: Dict[int, TermValue]
    Z0: float
    Zneq: float
    K_used: int = Field(ge=1)
    tail_bound: float = Field(default=0.0, ge=0)
    error_budget: Dict[str, float] = Field(default_factory=dict)
    raw_A0_terms: Dict[int, TermValue] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_residues(self) -> "ZetaDecomposition":
        if self.at == EvaluationPoint.DET_POINT:
            if any(term.residue != 0.0 for term in [*self.A0_terms.values(), *self.Aneq_terms.values()]):
                raise ValueError("derivatives at s = 0 carry no residues")
        else:
            first = self.A0_terms.get(1, TermValue(finite_part=0.0)).residue
            second = self.Aneq_terms.get(1, TermValue(finite_part=0.0)).residue
            if abs(first + second) > 1e-10:
                raise ValueError(f"residues of the first-order terms do not cancel: {first!r} + {second!r}")
        return self

    @property
    def finite_total(self) -> float:
        total = self.Z0 + self.Zneq
        for terms in (self.A0_terms, self.Aneq_terms):
            for index in sorted(terms):
                total += terms[index].finite_part
        return total

    @property
    def residue_total(self) -> float:
        total = 0.0
        for terms in (self.A0_terms, self.Aneq_terms):
            for index in sorted(terms):
                total += terms[index].residue
        return total


class DeterminantResult(BaseModel):
    """ζ'(0), log det = -ζ'(0) and det = exp(-ζ'(0))."""

    zeta_prime: float
    log_det: float
    det: float
    decomposition: ZetaDecomposition


class CasimirEnergyResult(BaseModel):
    """Finite part of ζ(-1/2) and its residue; the energy is meaningful when the residue vanishes."""

    energy: float
    residue: float
    decomposition: ZetaDecomposition


class DeltaATerms(BaseModel):
    """ε-derivatives of the A-terms at s = -1/2 and ε = 0."""

    terms: Dict[str, float]
    errors: Dict[str, float] = Field(default_factory=dict)


class EnergyChangeResult(BaseModel):
    """First-order change of the Casimir energy with its per-term breakdown."""

    delta_E: float
    term_breakdown: Dict[str, float]
    K_used: int = Field(ge=1)
    tail_bound: float = Field(ge=0)
    quadrature_errors: Dict[str, float] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_sum(self) -> "EnergyChangeResult":
        total = 0.0
        for value in self.term_breakdown.values():
            total += value
        if abs(self.delta_E - total) > 1e-12:
            raise ValueError(f"delta_E {self.delta_E!r} differs from the sum of its terms {total!r}")
        return self

    @classmethod
    def from_terms(cls, breakdown: Dict[str, float], **kwargs) -> "EnergyChangeResult":
        total = 0.0
        for value in breakdown.values():
            total += value
        return cls(delta_E=total, term_breakdown=breakdown, **kwargs)


# ---------------------------------------------------------------------------
# A-terms
# ---------------------------------------------------------------------------


def _geometry(f: np.ndarray) -> Tuple[np.ndarray, ...]:
    f0, f1, f2 = f[0], f[1], f[2]
    Q = 1.0 + f1 ** 2
    return f0, f1, f2, Q, np.sqrt(Q)


def _jet_integrals(
    p: ProfileSpec,
    integrands: Dict[str, JetIntegrand],
    spec: QuadratureSpec,
    bump: Optional[BumpSpec] = None,
) -> Tuple[Dict[str, float], Dict[str, float]]:
    """Integrate several functions of the jets (f, f', f'') and (g, g', g'') in one vector quadrature."""
    names = list(integrands)
    lo, hi = p.a, p.b
    if bump is not None:
        lo, hi = max(bump.support[0], p.a), min(bump.support[1], p.b)
        if bump.amplitude == 0.0 or not hi > lo:
            zeros = {name: 0.0 for name in names}
            return zeros, dict(zeros)

    def fn(x: np.ndarray) -> np.ndarray:
        f = p.jets(x, 2)
        g = bump.jets(x, 2) if bump is not None else None
        return np.stack([np.broadcast_to(integrands[name](f, g), x.shape) for name in names], axis=1)

    value, error = adaptive_quad(fn, lo, hi, spec, min_panels=4)
    return (
        {name: float(v) for name, v in zip(names, np.atleast_1d(value))},
        {name: float(e) for name, e in zip(names, np.atleast_1d(error))},
    )


def _term_spec(spec: Optional[QuadratureSpec]) -> QuadratureSpec:
    return (spec or QuadratureSpec()).tightened(TERM_TIGHTENING)


def a_terms_det(p: ProfileSpec, spec: Optional[QuadratureSpec] = None) -> AsymptoticTerms:
    """
    The six A'(0) values of the determinant ledger.

    Args:
        p: Profile
        spec: Quadrature tolerances (tightened internally)

    Returns:
        AsymptoticTerms with orders -1, 0, 1 of both sectors
    """

    def a0_minus_one(f, g):
        return -_geometry(f)[4]

    def a0_one(f, g):
        f0, f1, f2, Q, R = _geometry(f)
        return -(f1 ** 2 / (8.0 * f0 ** 2 * R) + f2 / (4.0 * f0 * R ** 3))

    def aneq_minus_one(f, g):
        f0, _, _, _, R = _geometry(f)
        return R / (6.0 * f0)

    def aneq_one(f, g):
        f0, f1, f2, Q, R = _geometry(f)
        return f1 ** 2 / (6.0 * R) + f0 * f2 / (2.0 * R)

    values, errors = _jet_integrals(
        p,
        {"A0_-1": a0_minus_one, "A0_1": a0_one, "Aneq_-1": aneq_minus_one, "Aneq_1": aneq_one},
        _term_spec(spec),
    )
    f_a, f_b = (float(v) for v in p.f(np.array([p.a, p.b])))
    return AsymptoticTerms(
        A0_terms={
            -1: TermValue(finite_part=values["A0_-1"]),
            0: TermValue(finite_part=0.0),
            1: TermValue(finite_part=values["A0_1"]),
        },
        Aneq_terms={
            -1: TermValue(finite_part=values["Aneq_-1"]),
            0: TermValue(finite_part=0.5 * math.log(2.0 * math.pi * (f_a ** 2 + f_b ** 2))),
            1: TermValue(finite_part=values["Aneq_1"]),
        },
        errors=errors,
    )


def _residue_parts(f: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    f0, f1, f2, Q, R = _geometry(f)
    return f1 ** 2 / (16.0 * math.pi * f0 ** 2 * R), f2 / (8.0 * math.pi * f0 * R ** 3)


def _boundary_values(p: ProfileSpec) -> Tuple[np.ndarray, ...]:
    return _geometry(p.jets(np.array([p.a, p.b]), 2))


def a_terms_energy(p: ProfileSpec, spec: Optional[QuadratureSpec] = None) -> AsymptoticTerms:
    """
    The A-terms at s = -1/2 with their finite parts and residues.

    The residue integrands of A⁰_1 and A≠_1 are exact negatives and are
    integrated on the same nodes, so they cancel to rounding.

    Args:
        p: Profile
        spec: Quadrature tolerances (tightened internally)

    Returns:
        AsymptoticTerms with orders -1..2 of both sectors
    """

    def a0_minus_one(f, g):
        return _geometry(f)[4] / (2.0 * math.pi)

    def a0_one_residue(f, g):
        first, second = _residue_parts(f)
        return second - first

    def aneq_minus_one(f, g):
        f0, _, _, _, R = _geometry(f)
        return ZETA_PRIME_MINUS_2 * R / (math.pi * f0 ** 2)

    def aneq_one_residue(f, g):
        first, second = _residue_parts(f)
        return first - second

    def aneq_two(f, g):
        f0, f1, f2, Q, R = _geometry(f)
        return f1 * f2 / (16.0 * f0 * Q ** 4)

    values, errors = _jet_integrals(
        p,
        {
            "A0_-1": a0_minus_one,
            "Res_A0_1": a0_one_residue,
            "Aneq_-1": aneq_minus_one,
            "Res_Aneq_1": aneq_one_residue,
            "FP_Aneq_2": aneq_two,
        },
        _term_spec(spec),
    )

    f0, f1, f2, Q, R = _boundary_values(p)
    a0_two = -float(np.sum((f1 ** 2 + f1 ** 4 - 2.0 * f0 * f2) / (f0 ** 2 * Q ** 2))) / (8.0 * math.pi)
    aneq_zero = float(np.sum(1.0 / f0)) / 24.0
    aneq_two_residue = -float(np.sum(f1 ** 2 / (f0 * Q))) / 256.0 - float(np.sum(f2 / Q ** 2)) / 32.0

    return AsymptoticTerms(
        A0_terms={
            -1: TermValue(finite_part=values["A0_-1"]),
            0: TermValue(finite_part=-1.0 / math.pi),
            1: TermValue(finite_part=0.0, residue=values["Res_A0_1"]),
            2: TermValue(finite_part=a0_two),
        },
        Aneq_terms={
            -1: TermValue(finite_part=values["Aneq_-1"]),
            0: TermValue(finite_part=aneq_zero),
            1: TermValue(finite_part=0.0, residue=values["Res_Aneq_1"]),
            2: TermValue(finite_part=values["FP_Aneq_2"], residue=aneq_two_residue),
        },
        errors=errors,
    )


def residue_at_minus_half(p: ProfileSpec, spec: Optional[QuadratureSpec] = None) -> float:
    """
    Residue of ζ at s = -1/2.

    The first-order residues cancel, so the value depends only on f, f' and f''
    at the two ends.
    """
    terms = a_terms_energy(p, spec)
    total = 0.0
    for sector in (terms.A0_terms, terms.Aneq_terms):
        for index in sorted(sector):
            total += sector[index].residue
    return total


def a0_terms_from_tables(
    p: ProfileSpec,
    at: EvaluationPoint = EvaluationPoint.ENERGY_POINT,
    spec: Optional[QuadratureSpec] = None,
) -> Dict[int, TermValue]:
    """
    k = 0 A-terms straight from the s-table integrals.

    At s = -1/2: A⁰_i = (sin πs/π)(-i/(2s+i))(∫s_i - boundary part of log A⁺),
    which gives ∫s_{-1}/(2π), -1/π, a pure residue ∫s_1/(2π), and
    (2/π)(∫s_2 - s_1(a)/s_{-1}(a)). At s = 0 the derivatives are -∫s_i for i ≠ 0.
    These are reported beside the printed forms; differences are not reconciled.
    """
    N = DETERMINANT_ORDER if at == EvaluationPoint.DET_POINT else ENERGY_ORDER
    integrals, _ = coefficient_integrals(p, SeriesKind.S_SERIES, N, spec=_term_spec(spec))
    if at == EvaluationPoint.DET_POINT:
        return {
            -1: TermValue(finite_part=-float(integrals[0])),
            0: TermValue(finite_part=0.0),
            1: TermValue(finite_part=-float(integrals[2])),
        }
    boundary = evaluate_coefficients(p, SeriesKind.S_SERIES, N, np.array([p.a]))[:, 0]
    return {
        -1: TermValue(finite_part=float(integrals[0]) / (2.0 * math.pi)),
        0: TermValue(finite_part=-1.0 / math.pi),
        1: TermValue(finite_part=0.0, residue=float(integrals[2]) / (2.0 * math.pi)),
        2: TermValue(finite_part=2.0 / math.pi * (float(integrals[3]) - float(boundary[2] / boundary[0]))),
    }


def delta_a_terms(p: ProfileSpec, bump: BumpSpec, spec: Optional[QuadratureSpec] = None) -> DeltaATerms:
    """
    d/dε at ε = 0 of every A-term at s = -1/2, in their printed g, g', g'' forms.

    Boundary terms do not move because the bump vanishes with all derivatives at
    the ends; the two first-order residue derivatives cancel.

    Args:
        p: Unperturbed profile
        bump: Perturbation g
        spec: Quadrature tolerances (tightened internally)

    Returns:
        DeltaATerms keyed by DELTA_TERM_NAMES
    """

    def a0_minus_one(f, g):
        f0, f1, f2, Q, R = _geometry(f)
        return f1 * g[1] / (2.0 * math.pi * R)

    def residue_parts(f, g):
        f0, f1, f2, Q, R = _geometry(f)
        return (
            f1 ** 2 * g[0] / (4.0 * f0 ** 3 * R),
            f1 * (2.0 + f1 ** 2) * g[1] / (8.0 * f0 ** 2 * R ** 3),
            f2 * g[0] / (4.0 * f0 ** 2 * R ** 3),
            3.0 * f1 * f2 * g[1] / (4.0 * f0 * R ** 5),
            g[2] / (4.0 * f0 * R ** 3),
        )

    def a0_one_residue(f, g):
        t1, t2, t3, t4, t5 = residue_parts(f, g)
        return (t1 - t2 - t3 - t4 + t5) / (2.0 * math.pi)

    def aneq_one_residue(f, g):
        t1, t2, t3, t4, t5 = residue_parts(f, g)
        return (-t1 + t2 + t3 + t4 - t5) / (2.0 * math.pi)

    def aneq_minus_one(f, g):
        f0, f1, f2, Q, R = _geometry(f)
        return (
            -2.0 * ZETA_PRIME_MINUS_2 / math.pi * R * g[0] / f0 ** 3
            + ZETA_PRIME_MINUS_2 / math.pi * f1 * g[1] / (f0 ** 2 * R)
        )

    def aneq_two(f, g):
        f0, f1, f2, Q, R = _geometry(f)
        return (
            -f1 * f2 * g[0] / (f0 ** 2 * Q ** 4)
            + f2 * (1.0 - 7.0 * f1 ** 2) * g[1] / (f0 * Q ** 5)
            + f1 * g[2] / (f0 * Q ** 4)
        ) / 16.0

    values, errors = _jet_integrals(
        p,
        {
            "dA0_-1": a0_minus_one,
            "dRes_A0_1": a0_one_residue,
            "dAneq_-1": aneq_minus_one,
            "dRes_Aneq_1": aneq_one_residue,
            "dFP_Aneq_2": aneq_two,
        },
        _term_spec(spec),
        bump=bump,
    )
    terms = {name: values.get(name, 0.0) for name in DELTA_TERM_NAMES}
    return DeltaATerms(terms=terms, errors=errors)


def consolidated_delta_terms(
    p: ProfileSpec,
    bump: BumpSpec,
    spec: Optional[QuadratureSpec] = None,
) -> Dict[str, float]:
    """
    The three g-weighted integrals the nonzero d/dε A-terms reduce to after moving g', g'' onto f.

    Returns:
        Mapping with the keys dA0_-1, dAneq_-1 and dFP_Aneq_2
    """

    def a0_minus_one(f, g):
        f0, f1, f2, Q, R = _geometry(f)
        return -f2 * g[0] / (2.0 * math.pi * R ** 3)

    def aneq_minus_one(f, g):
        f0, f1, f2, Q, R = _geometry(f)
        return -ZETA_PRIME_MINUS_2 / math.pi * (f0 * f2 + 2.0 * f1 ** 2 + 2.0) * g[0] / (f0 ** 3 * R ** 3)

    def aneq_two(f, g):
        f0, f1, f2, Q, R = _geometry(f)
        return (2.0 * f1 ** 3 * Q + f0 * f1 * (5.0 * f1 ** 2 - 3.0) * f2) * g[0] / (16.0 * f0 ** 3 * Q ** 5)

    values, _ = _jet_integrals(
        p,
        {"dA0_-1": a0_minus_one, "dAneq_-1": aneq_minus_one, "dFP_Aneq_2": aneq_two},
        _term_spec(spec),
        bump=bump,
    )
    return values


# ---------------------------------------------------------------------------
# Subtracted radial data
# ---------------------------------------------------------------------------


class _TableCache:
    """W-table rows computed once per u value."""

    def __init__(self, compute: Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]]):
        self._compute = compute
        self._rows: Dict[float, Tuple[np.ndarray, np.ndarray]] = {}

    def __call__(self, u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        missing = np.array(sorted({float(v) for v in u} - set(self._rows)))
        if missing.size:
            integrals, boundary = self._compute(missing)
            for j, value in enumerate(missing):
                self._rows[float(value)] = (integrals[:, j], boundary[:, j])
        integrals = np.stack([self._rows[float(v)][0] for v in u], axis=1)
        boundary = np.stack([self._rows[float(v)][1] for v in u], axis=1)
        return integrals, boundary


class AsymptoticSubtraction:
    """
    log X_k(b; iλ) with its large-parameter expansion through order N removed.

    k = 0 uses λ as the large parameter and the s-table; k ≥ 1 uses k at fixed
    u = λ/k and the w-table at that u. The growth term t·∫c_{-1} cancels
    against the gauge exponent of the radial solution and is never formed.
    Where the neglected exponentially small term is below e^{-ASYMPTOTIC_SWITCH}
    and the last extension order is below SWITCH_FRACTION·abs_tol, the radial
    solve is replaced by the next two asymptotic orders; profiles without exact
    higher derivatives have no extension, and there the remainder is taken as
    zero once its leading order is below the same bound.
    """

    def __init__(self, p: ProfileSpec, N: int, spec: Optional[QuadratureSpec] = None):
        self.p = p
        self.N = N
        self.spec = spec or QuadratureSpec()
        self.extended = p.has_exact_jets
        self.order = N + 2 if self.extended else N
        self.table_spec = self.spec.tightened(TABLE_TIGHTENING)
        self.switch_tol = SWITCH_FRACTION * self.spec.abs_tol
        self.s_integrals, self.s_errors = coefficient_integrals(
            p, SeriesKind.S_SERIES, self.order, spec=self.table_spec
        )
        self.s_boundary = evaluate_coefficients(p, SeriesKind.S_SERIES, self.order, np.array([p.a]))[:, 0]
        self.w_table = _TableCache(self._compute_w)

    def _compute_w(self, u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        kind = SeriesKind.W_SERIES
        integrals, _ = coefficient_integrals(self.p, kind, self.order, u=u, spec=self.table_spec)
        boundary = evaluate_coefficients(self.p, kind, self.order, np.array([self.p.a]), u)[:, 0, :]
        return integrals.T, boundary

    def _remainder(self, integrals: np.ndarray, boundary: np.ndarray, t: np.ndarray):
        if self.extended:
            return (
                asymptotic_remainder(integrals, boundary, t, self.N),
                remainder_last_order(integrals, boundary, t, self.N),
            )
        scale = np.max(np.abs(integrals[1:]), axis=0)
        return np.zeros(np.shape(t)), scale * t ** (-(self.N - 1.0))

    def _evaluate(
        self,
        k: np.ndarray,
        lam: np.ndarray,
        t: np.ndarray,
        integrals: np.ndarray,
        boundary: np.ndarray,
        asymptotics: bool,
        rtol: float,
    ) -> np.ndarray:
        N = self.N
        growth = t * integrals[0]
        series = boundary_log_series(boundary, t, N)
        for i in range(0, N - 1):
            series = series + t ** (-float(i)) * integrals[i + 1]
        series = np.broadcast_to(series, lam.shape)

        values = np.empty(lam.shape)
        use = np.zeros(lam.shape, dtype=bool)
        if asymptotics:
            remainder, last = self._remainder(integrals, boundary, t)
            use = (2.0 * growth >= ASYMPTOTIC_SWITCH) & (last <= self.switch_tol)
            values[use] = np.broadcast_to(remainder, lam.shape)[use]
        solve = ~use
        if np.any(solve):
            batch = solve_radial_batch(self.p, k[solve], lam[solve], growth=growth[solve], rtol=rtol)
            values[solve] = batch.log_reduced - series[solve]
        return values

    def log_X0(self, lam: np.ndarray, rtol: float = ODE_RTOL) -> np.ndarray:
        """log X_0(b; iλ), used on [0, 1] where nothing is subtracted."""
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        batch = solve_radial_batch(self.p, 0.0, lam, growth=lam * self.s_integrals[0], rtol=rtol)
        return batch.log_X

    def radial(self, lam: np.ndarray, asymptotics: bool = True, rtol: float = ODE_RTOL) -> np.ndarray:
        """log X_0(b; iλ) - log A⁺ - Σ_{i=-1}^{N-2} λ^{-i} ∫s_i for λ > 0."""
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        return self._evaluate(
            np.zeros_like(lam), lam, lam, self.s_integrals, self.s_boundary, asymptotics, rtol
        )

    def mode(self, k, u, asymptotics: bool = True, rtol: float = ODE_RTOL) -> np.ndarray:
        """log X_k(b; iuk) - log B⁺ - Σ_{i=-1}^{N-2} k^{-i} ∫w_i(u) for k ≥ 1; k and u broadcast."""
        k, u = np.broadcast_arrays(
            np.atleast_1d(np.asarray(k, dtype=float)), np.atleast_1d(np.asarray(u, dtype=float))
        )
        integrals, boundary = self.w_table(u)
        return self._evaluate(k, u * k, k, integrals, boundary, asymptotics, rtol)

    def mode_asymptotics(self, u) -> Tuple[np.ndarray, np.ndarray]:
        """Coefficients of k^{-(N-1)} and k^{-N} in the large-k form of mode(k, u)."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if not self.extended:
            return np.zeros(u.shape), np.zeros(u.shape)
        integrals, boundary = self.w_table(u)
        return remainder_coefficients(integrals, boundary, self.N)


class PerturbationSubtraction:
    """
    X̂_k/X_k(b; iλ) with the ε-derivative of the large-parameter expansion removed.

    log A⁺ and log B⁺ do not depend on ε because the bump vanishes at a, so only
    the integrals ∫∂_ε c_i are subtracted. The ratio differs from its expansion
    by terms of order exp(-2·edge exponent), the growth between the bump and the
    nearer end.
    """

    def __init__(self, p: ProfileSpec, bump: BumpSpec, N: int, spec: Optional[QuadratureSpec] = None):
        self.p = p
        self.bump = bump
        self.N = N
        self.spec = spec or QuadratureSpec()
        self.extended = p.has_exact_jets
        self.order = N + 2 if self.extended else N
        self.table_spec = self.spec.tightened(TABLE_TIGHTENING)
        self.switch_tol = SWITCH_FRACTION * self.spec.abs_tol
        self.support = (max(bump.support[0], p.a), min(bump.support[1], p.b))
        self.trivial = bump.amplitude == 0.0 or not self.support[1] > self.support[0]
        self.s_integrals, self.s_errors = epsilon_integrals(
            p, bump, SeriesKind.S_SERIES, self.order, spec=self.table_spec
        )
        self.w_table = _TableCache(self._compute_w)

    def _compute_w(self, u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        integrals, _ = epsilon_integrals(
            self.p, self.bump, SeriesKind.W_SERIES, self.order, u=u, spec=self.table_spec
        )
        return integrals.T, np.zeros((1, u.size))

    def _evaluate(
        self,
        k: np.ndarray,
        lam: np.ndarray,
        t: np.ndarray,
        integrals: np.ndarray,
        asymptotics: bool,
        rtol: float,
    ) -> np.ndarray:
        N = self.N
        if self.trivial:
            return np.zeros(lam.shape)
        expansion = 0.0
        for i in range(-1, N - 1):
            expansion = expansion + t ** (-float(i)) * integrals[i + 1]
        expansion = np.broadcast_to(expansion, lam.shape)

        values = np.empty(lam.shape)
        use = np.zeros(lam.shape, dtype=bool)
        if asymptotics:
            if self.extended:
                remainder = epsilon_remainder(integrals, t, N)
                last = np.abs(integrals[N + 1] * t ** (-float(N)))
            else:
                remainder = np.zeros(np.shape(t))
                last = np.max(np.abs(integrals[1:]), axis=0) * t ** (-(N - 1.0))
            candidates = np.broadcast_to(last <= self.switch_tol, lam.shape)
            if np.any(candidates):
                exponent = 2.0 * edge_exponents(self.p, k, lam, *self.support)
                use = candidates & (exponent >= ASYMPTOTIC_SWITCH)
                values[use] = np.broadcast_to(remainder, lam.shape)[use]
        solve = ~use
        if np.any(solve):
            batch = solve_radial_batch(self.p, k[solve], lam[solve], bump=self.bump, rtol=rtol)
            values[solve] = batch.ratio - expansion[solve]
        return values

    def ratio0(self, lam: np.ndarray, rtol: float = ODE_RTOL) -> np.ndarray:
        """X̂_0/X_0(b; iλ), used on [0, 1] where nothing is subtracted."""
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        if self.trivial:
            return np.zeros(lam.shape)
        return solve_radial_batch(self.p, 0.0, lam, bump=self.bump, rtol=rtol).ratio

    def radial(self, lam: np.ndarray, asymptotics: bool = True, rtol: float = ODE_RTOL) -> np.ndarray:
        """X̂_0/X_0 - Σ_{i=-1}^{N-2} λ^{-i} ∫∂_ε s_i for λ > 0."""
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        return self._evaluate(np.zeros_like(lam), lam, lam, self.s_integrals, asymptotics, rtol)

    def mode(self, k, u, asymptotics: bool = True, rtol: float = ODE_RTOL) -> np.ndarray:
        """X̂_k/X_k - Σ_{i=-1}^{N-2} k^{-i} ∫∂_ε w_i(u) for k ≥ 1; k and u broadcast."""
        k, u = np.broadcast_arrays(
            np.atleast_1d(np.asarray(k, dtype=float)), np.atleast_1d(np.asarray(u, dtype=float))
        )
        if self.trivial:
            return np.zeros(u.shape)
        integrals, _ = self.w_table(u)
        return self._evaluate(k, u * k, k, integrals, asymptotics, rtol)

    def mode_asymptotics(self, u) -> Tuple[np.ndarray, np.ndarray]:
        """Coefficients of k^{-(N-1)} and k^{-N} in the large-k form of mode(k, u)."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if not self.extended or self.trivial:
            return np.zeros(u.shape), np.zeros(u.shape)
        integrals, _ = self.w_table(u)
        return integrals[self.N], integrals[self.N + 1]


# ---------------------------------------------------------------------------
# Z-terms
# ---------------------------------------------------------------------------


def _mode_series(
    residual: Callable[[np.ndarray], np.ndarray],
    known: Sequence[Tuple[float, float]],
    spec: QuadratureSpec,
    K: Optional[int],
) -> ZTerm:
    """
    Σ_{k≥1} t_k where t_k = r_k + Σ_j c_j k^{-p_j}.

    The residual r_k is summed with tail control; the power-law part is summed
    exactly as Σ_j c_j ζ_R(p_j).
    """
    target = TAIL_FRACTION * spec.abs_tol

    def tail(K_: int) -> float:
        return integral_tail(residual, K_, target)

    result = series_with_tail(residual, tail=tail, target_tol=target, K_cap=spec.k_cap, fixed_K=K)
    asymptotic = 0.0
    for coefficient, power in known:
        if coefficient != 0.0:
            asymptotic += coefficient * float(riemann_zeta(power))
    return ZTerm(value=result.sum + asymptotic, K_used=result.K_used, tail_bound=result.tail_bound)


def z0_prime_zero(p: ProfileSpec, spec: Optional[QuadratureSpec] = None) -> ZTerm:
    """
    Z⁰'(0) = -log X_0(b; 0) - log(2 s_{-1}(a)) + Σ_{i=-1}^{1} ∫s_i.

    Args:
        p: Profile
        spec: Quadrature tolerances

    Returns:
        ZTerm
    """
    spec = spec or QuadratureSpec()
    N = DETERMINANT_ORDER
    integrals, errors = coefficient_integrals(p, SeriesKind.S_SERIES, N, spec=spec.tightened(TABLE_TIGHTENING))
    boundary = evaluate_coefficients(p, SeriesKind.S_SERIES, N, np.array([p.a]))[:, 0]
    batch = solve_radial_batch(p, 0.0, np.array([0.0]), growth=np.zeros(1))
    value = -float(batch.log_X[0]) - math.log(2.0 * float(boundary[0]))
    for i in range(N):
        value += float(integrals[i])
    return ZTerm(value=value, error=float(np.sum(errors[:N])))


def zneq_prime_zero(
    p: ProfileSpec,
    K: Optional[int] = None,
    spec: Optional[QuadratureSpec] = None,
    subtraction: Optional[AsymptoticSubtraction] = None,
) -> ZTerm:
    """
    Z≠'(0) = -2 Σ_{k≥1} (log X_k(b; 0) - log B⁺ - Σ_{i=-1}^{1} k^{-i} ∫w_i)|_{u=0}.

    Args:
        p: Profile
        K: Fixed number of modes; chosen from the tail bound when omitted
        spec: Quadrature tolerances
        subtraction: Precomputed order-3 subtraction of p

    Returns:
        ZTerm with K used and the tail bound
    """
    spec = spec or QuadratureSpec()
    sub = subtraction or AsymptoticSubtraction(p, DETERMINANT_ORDER, spec)
    N = sub.N
    zero = np.zeros(1)
    c0, c1 = (float(c[0]) for c in sub.mode_asymptotics(zero))

    def residual(ks: np.ndarray) -> np.ndarray:
        ks = np.atleast_1d(np.asarray(ks, dtype=float))
        values = sub.mode(ks, np.zeros_like(ks))
        return -2.0 * (values - c0 * ks ** (-(N - 1.0)) - c1 * ks ** (-float(N)))

    result = _mode_series(residual, [(-2.0 * c0, N - 1.0), (-2.0 * c1, float(N))], spec, K)
    logger.debug("Z≠'(0) = %.15g with K=%d, tail %.3e", result.value, result.K_used, result.tail_bound)
    return result


def z0_minus_half(
    p: ProfileSpec,
    spec: Optional[QuadratureSpec] = None,
    subtraction: Optional[AsymptoticSubtraction] = None,
) -> ZTerm:
    """
    Z⁰(-1/2) = -(1/π)(F(1) - ∫_0^1 F dλ) + (1/π)(R(1) + ∫_1^∞ R dλ).

    F = log X_0(b; iλ) and R is F with the order-4 expansion removed.

    Args:
        p: Profile
        spec: Quadrature tolerances
        subtraction: Precomputed order-4 subtraction of p

    Returns:
        ZTerm
    """
    spec = spec or QuadratureSpec()
    sub = subtraction or AsymptoticSubtraction(p, ENERGY_ORDER, spec)
    inner_spec = spec.tightened(MODE_TIGHTENING)
    inner, inner_err = adaptive_quad(sub.log_X0, 0.0, 1.0, inner_spec)
    outer, outer_err = improper_quad(sub.radial, inner_spec, lo=1.0)
    F1 = float(sub.log_X0(np.array([1.0]))[0])
    R1 = float(sub.radial(np.array([1.0]))[0])
    value = -(F1 - float(inner)) / math.pi + (R1 + float(outer)) / math.pi
    return ZTerm(value=value, error=(float(inner_err) + float(outer_err)) / math.pi)


def zneq_minus_half(
    p: ProfileSpec,
    K: Optional[int] = None,
    spec: Optional[QuadratureSpec] = None,
    subtraction: Optional[AsymptoticSubtraction] = None,
) -> ZTerm:
    """
    Z≠(-1/2) = Σ_{k≥1} (2k/π) ∫_0^∞ Q_k(u) du, Q_k the order-4 subtracted log X_k.

    Args:
        p: Profile
        K: Fixed number of modes; chosen from the tail bound when omitted
        spec: Quadrature tolerances
        subtraction: Precomputed order-4 subtraction of p

    Returns:
        ZTerm with K used, tail bound and the summed quadrature errors
    """
    spec = spec or QuadratureSpec()
    sub = subtraction or AsymptoticSubtraction(p, ENERGY_ORDER, spec)
    return _u_mode_series(sub, K, spec)


def _u_mode_series(sub, K: Optional[int], spec: QuadratureSpec) -> ZTerm:
    """Σ_k (2k/π) ∫_0^∞ sub.mode(k, u) du with the large-k power law summed exactly."""
    N = sub.N
    mode_spec = spec.tightened(MODE_TIGHTENING)
    errors: List[float] = []

    def residual(ks: np.ndarray) -> np.ndarray:
        out = []
        for k in np.atleast_1d(ks):
            k = float(k)

            def integrand(u: np.ndarray) -> np.ndarray:
                first, second = sub.mode_asymptotics(u)
                return sub.mode(k, u) - first * k ** (-(N - 1.0)) - second * k ** (-float(N))

            value, error = improper_quad(integrand, mode_spec)
            out.append(2.0 * k / math.pi * float(value))
            errors.append(2.0 * k / math.pi * float(error))
        return np.array(out)

    def coefficients(u: np.ndarray) -> np.ndarray:
        first, second = sub.mode_asymptotics(u)
        return np.stack([first, second], axis=1)

    (C0, C1), _ = improper_quad(coefficients, mode_spec)
    known = [(2.0 / math.pi * float(C0), N - 2.0), (2.0 / math.pi * float(C1), N - 1.0)]
    result = _mode_series(residual, known, spec, K)
    return result.model_copy(update={"error": float(sum(errors))})


def delta_z0(
    p: ProfileSpec,
    bump: BumpSpec,
    spec: Optional[QuadratureSpec] = None,
    subtraction: Optional[PerturbationSubtraction] = None,
) -> ZTerm:
    """
    d/dε Z⁰(-1/2) = -(1/π)(ρ(1) - ∫_0^1 ρ) + (1/π)(R_ε(1) + ∫_1^∞ R_ε), ρ = X̂_0/X_0.

    Args:
        p: Unperturbed profile
        bump: Perturbation g
        spec: Quadrature tolerances
        subtraction: Precomputed order-4 perturbation subtraction

    Returns:
        ZTerm
    """
    spec = spec or QuadratureSpec()
    sub = subtraction or PerturbationSubtraction(p, bump, ENERGY_ORDER, spec)
    if sub.trivial:
        return ZTerm(value=0.0)
    inner_spec = spec.tightened(MODE_TIGHTENING)
    inner, inner_err = adaptive_quad(sub.ratio0, 0.0, 1.0, inner_spec)
    outer, outer_err = improper_quad(sub.radial, inner_spec, lo=1.0)
    rho1 = float(sub.ratio0(np.array([1.0]))[0])
    R1 = float(sub.radial(np.array([1.0]))[0])
    value = -(rho1 - float(inner)) / math.pi + (R1 + float(outer)) / math.pi
    return ZTerm(value=value, error=(float(inner_err) + float(outer_err)) / math.pi)


def delta_zneq(
    p: ProfileSpec,
    bump: BumpSpec,
    K: Optional[int] = None,
    spec: Optional[QuadratureSpec] = None,
    subtraction: Optional[PerturbationSubtraction] = None,
) -> ZTerm:
    """
    d/dε Z≠(-1/2) = Σ_k (2k/π) ∫_0^∞ (X̂_k/X_k - Σ_{i=-1}^{2} k^{-i} ∫∂_ε w_i) du.

    Args:
        p: Unperturbed profile
        bump: Perturbation g
        K: Fixed number of modes; chosen from the tail bound when omitted
        spec: Quadrature tolerances
        subtraction: Precomputed order-4 perturbation subtraction

    Returns:
        ZTerm with K used, tail bound and the summed quadrature errors
    """
    spec = spec or QuadratureSpec()
    sub = subtraction or PerturbationSubtraction(p, bump, ENERGY_ORDER, spec)
    return _u_mode_series(sub, K, spec)


# ---------------------------------------------------------------------------
# Ledgers
# ---------------------------------------------------------------------------


def _log_ledger(label: str, decomposition: ZetaDecomposition) -> None:
    logger.info("%s ledger: Z0 = %.15g, Zneq = %.15g (K=%d)", label, decomposition.Z0, decomposition.Zneq,
                decomposition.K_used)
    for sector, terms in (("A0", decomposition.A0_terms), ("Aneq", decomposition.Aneq_terms)):
        for index in sorted(terms):
            logger.info("%s ledger: %s_%d FP = %.15g, Res = %.15g", label, sector, index,
                        terms[index].finite_part, terms[index].residue)


def functional_determinant(
    p: ProfileSpec,
    K: Optional[int] = None,
    spec: Optional[QuadratureSpec] = None,
) -> DeterminantResult:
    """
    ζ'(0) = Z⁰'(0) + Z≠'(0) + Σ A'(0) with the order-3 subtraction; log det = -ζ'(0).

    Args:
        p: Profile
        K: Fixed number of modes; chosen from the tail bound when omitted
        spec: Quadrature tolerances

    Returns:
        DeterminantResult
    """
    spec = spec or QuadratureSpec()
    terms = a_terms_det(p, spec)
    z0 = z0_prime_zero(p, spec)
    zneq = zneq_prime_zero(p, K, spec)
    decomposition = ZetaDecomposition(
        at=EvaluationPoint.DET_POINT,
        A0_terms=terms.A0_terms,
        Aneq_terms=terms.Aneq_terms,
        Z0=z0.value,
        Zneq=zneq.value,
        K_used=zneq.K_used,
        tail_bound=zneq.tail_bound,
        error_budget={"Z0": z0.error, "Zneq_tail": zneq.tail_bound, **terms.errors},
        raw_A0_terms=a0_terms_from_tables(p, EvaluationPoint.DET_POINT, spec),
    )
    _log_ledger("determinant", decomposition)
    zeta_prime = decomposition.finite_total
    try:
        det = math.exp(-zeta_prime)
    except OverflowError:
        det = math.inf
    return DeterminantResult(zeta_prime=zeta_prime, log_det=-zeta_prime, det=det, decomposition=decomposition)


def casimir_energy(
    p: ProfileSpec,
    K: Optional[int] = None,
    spec: Optional[QuadratureSpec] = None,
) -> CasimirEnergyResult:
    """
    Finite part and residue of ζ(-1/2) with the order-4 subtraction.

    Args:
        p: Profile
        K: Fixed number of modes; chosen from the tail bound when omitted
        spec: Quadrature tolerances

    Returns:
        CasimirEnergyResult
    """
    spec = spec or QuadratureSpec()
    terms = a_terms_energy(p, spec)
    sub = AsymptoticSubtraction(p, ENERGY_ORDER, spec)
    z0 = z0_minus_half(p, spec, subtraction=sub)
    zneq = zneq_minus_half(p, K, spec, subtraction=sub)
    decomposition = ZetaDecomposition(
        at=EvaluationPoint.ENERGY_POINT,
        A0_terms=terms.A0_terms,
        Aneq_terms=terms.Aneq_terms,
        Z0=z0.value,
        Zneq=zneq.value,
        K_used=zneq.K_used,
        tail_bound=zneq.tail_bound,
        error_budget={"Z0": z0.error, "Zneq": zneq.error, "Zneq_tail": zneq.tail_bound, **terms.errors},
        raw_A0_terms=a0_terms_from_tables(p, EvaluationPoint.ENERGY_POINT, spec),
    )
    _log_ledger("energy", decomposition)
    residue = decomposition.residue_total
    if abs(residue) > spec.abs_tol:
        logger.warning("residue at s=-1/2 is %.6g; the energy of %s is not finite", residue, p.label)
    return CasimirEnergyResult(energy=decomposition.finite_total, residue=residue, decomposition=decomposition)


def _check_bump_at_ends(a: float, b: float, bump: BumpSpec) -> None:
    lo, hi = bump.support
    if not bump.fits(a, b):
        raise ConfigError(
            f"bump support ({lo:g}, {hi:g}) is not inside [{a:g}, {b:g}]",
            diagnostics={"support": [lo, hi], "interval": [a, b]},
        )
    edges = np.abs(bump.jets(np.array([a, b]), 2))
    if np.max(edges) > 1e-12:
        raise ConfigError(
            "bump does not vanish at the ends, so the residue would depend on ε",
            diagnostics={"max_edge_jet": float(np.max(edges))},
        )


def delta_energy(
    p: ProfileSpec,
    bump: BumpSpec,
    K: Optional[int] = None,
    spec: Optional[QuadratureSpec] = None,
) -> EnergyChangeResult:
    """
    ΔE = d/dε ζ(-1/2) at ε = 0 for f -> f + εg: every d/dε A-term plus d/dε Z⁰ and d/dε Z≠.

    Args:
        p: Unperturbed profile
        bump: Perturbation g, vanishing at both ends
        K: Fixed number of modes; chosen from the tail bound when omitted
        spec: Quadrature tolerances

    Returns:
        EnergyChangeResult
    """
    spec = spec or QuadratureSpec()
    _check_bump_at_ends(p.a, p.b, bump)
    a_terms = delta_a_terms(p, bump, spec)
    sub = PerturbationSubtraction(p, bump, ENERGY_ORDER, spec)
    dz0 = delta_z0(p, bump, spec, subtraction=sub)
    dzneq = delta_zneq(p, bump, K, spec, subtraction=sub)

    breakdown = dict(a_terms.terms)
    breakdown["dZ0"] = dz0.value
    breakdown["dZneq"] = dzneq.value
    result = EnergyChangeResult.from_terms(
        breakdown,
        K_used=dzneq.K_used,
        tail_bound=dzneq.tail_bound,
        quadrature_errors={"dZ0": dz0.error, "dZneq": dzneq.error, **a_terms.errors},
    )
    logger.info("ΔE(%s, c=%g) = %.15g", p.label, bump.c, result.delta_E)
    for name, value in breakdown.items():
        logger.info("ΔE term %s = %.15g", name, value)
    return result


def delta_energy_cylinder(
    alpha: float,
    a: float,
    b: float,
    bump: BumpSpec,
    K: Optional[int] = None,
    spec: Optional[QuadratureSpec] = None,
) -> EnergyChangeResult:
    """
    ΔE for f ≡ α from the closed-form ratios.

    Only d/dε A≠_{-1} = -2ζ_R'(-2)/(πα³) ∫g survives among the A-terms;
    d/dε Z⁰ = (1/π)∫_0^∞ X̂_0/X_0 dλ and d/dε Z≠ = (2/π) Σ_k k ∫_0^∞ (X̂_k/X_k + k∫g/(α²ρ)) du.

    Args:
        alpha: Cylinder radius
        a: Left end
        b: Right end
        bump: Perturbation g, vanishing at both ends
        K: Fixed number of modes; chosen from the tail bound when omitted
        spec: Quadrature tolerances

    Returns:
        EnergyChangeResult with the same term names as delta_energy
    """
    spec = spec or QuadratureSpec()
    cfg = cylinder.CylinderConfig(alpha=alpha, a=a, b=b)
    _check_bump_at_ends(a, b, bump)
    mode_spec = spec.tightened(MODE_TIGHTENING)

    breakdown = {name: 0.0 for name in DELTA_TERM_NAMES}
    lo, hi = bump.support
    total_g = 0.0
    if bump.amplitude != 0.0:
        total_g, _ = adaptive_quad(bump.g, lo, hi, _term_spec(spec), min_panels=4)
    breakdown["dAneq_-1"] = -2.0 * ZETA_PRIME_MINUS_2 / (math.pi * alpha ** 3) * float(total_g)

    dz0, dz0_err = improper_quad(lambda lam: cylinder.ratio0(cfg, bump, lam), mode_spec)
    breakdown["dZ0"] = float(dz0) / math.pi

    errors: List[float] = []

    def summand(ks: np.ndarray) -> np.ndarray:
        out = []
        for k in np.atleast_1d(ks):
            k = float(k)
            value, error = improper_quad(lambda u: cylinder.subtracted_ratiok(cfg, bump, k, u), mode_spec)
            out.append(2.0 * k / math.pi * float(value))
            errors.append(2.0 * k / math.pi * float(error))
        return np.array(out)

    series = _mode_series(summand, [], spec, K)
    breakdown["dZneq"] = series.value
    result = EnergyChangeResult.from_terms(
        breakdown,
        K_used=series.K_used,
        tail_bound=series.tail_bound,
        quadrature_errors={"dZ0": float(dz0_err) / math.pi, "dZneq": float(sum(errors))},
    )
    logger.info("ΔE(cylinder α=%g, [%g, %g], c=%g) = %.15g", alpha, a, b, bump.c, result.delta_E)
    return result
