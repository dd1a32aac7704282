"""
Profile functions of the surface of revolution, bump perturbations and f + εg.

Profiles and bumps keep their sympy expression when one exists, so that
derivatives of every order are exact. A profile built from plain callables
only knows f, f' and f''; its third and fourth derivatives then come from
Richardson-extrapolated differences of f''.
"""
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import sympy as sp
from pydantic import BaseModel

from revzeta.config import DERIVATIVE_RTOL, VALIDATION_POINTS
from revzeta.core.errors import ConfigError, DifferentiationFailure, PositivityViolation

logger = logging.getLogger(__name__)

ArrayFn = Callable[[np.ndarray], np.ndarray]

X = sp.Symbol("x", real=True)

# Step used for the difference fallback of f''' and f''''
FALLBACK_STEP = 1e-4
# Largest exponent magnitude evaluated inside a bump lobe; beyond it the lobe is 0
BUMP_EXPONENT_CUTOFF = 700.0
# Relative slack when checking that a support lies inside [a, b]
SUPPORT_SLACK = 1e-12


@lru_cache(maxsize=512)
def _lambdified(expr: sp.Expr) -> Callable:
    return sp.lambdify(X, expr, modules="numpy", cse=True)


def lambdify_x(expr: sp.Expr) -> ArrayFn:
    """
    Turn an expression in x into a vectorised float function.

    Constant expressions are broadcast to the shape of the argument.
    """
    fn = _lambdified(sp.sympify(expr))

    def evaluate(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.asarray(fn(x), dtype=float) + np.zeros_like(x)

    return evaluate


@lru_cache(maxsize=512)
def _derivative_expr(expr: sp.Expr, n: int) -> sp.Expr:
    return sp.diff(expr, X, n) if n else expr


@dataclass(frozen=True)
class ProfileSpec:
    """
    Profile f > 0 on [a, b] with its first two derivatives.

    expression, when present, is the exact sympy form of f in the symbol x and
    supplies every higher derivative. extra_terms lists (weight, bump) pairs added
    to the profile, which is how f + εg keeps exact derivatives.
    """

    a: float
    b: float
    f: ArrayFn
    f_prime: ArrayFn
    f_double_prime: ArrayFn
    expression: Optional[sp.Expr] = None
    extra_terms: Tuple[Tuple[float, "BumpSpec"], ...] = ()
    label: str = "custom"

    @property
    def length(self) -> float:
        return self.b - self.a

    @property
    def has_exact_jets(self) -> bool:
        """True when derivatives of every order are exact."""
        return self.expression is not None

    def derivative(self, n: int) -> ArrayFn:
        """
        Return the n-th derivative of f as a vectorised function.

        Args:
            n: Derivative order

        Returns:
            Function of x
        """
        if n == 0:
            return self.f
        if n == 1:
            return self.f_prime
        if n == 2:
            return self.f_double_prime
        if self.expression is not None:
            base = lambdify_x(_derivative_expr(self.expression, n))
        elif n in (3, 4):
            base = _difference_derivative(self._base_second_derivative(), n)
        else:
            raise DifferentiationFailure(
                f"derivative of order {n} needs an expression profile",
                diagnostics={"order": n, "label": self.label},
            )
        if not self.extra_terms:
            return base
        terms = [(weight, bump.derivative(n)) for weight, bump in self.extra_terms]

        def combined(x: np.ndarray) -> np.ndarray:
            total = base(x)
            for weight, fn in terms:
                total = total + weight * fn(x)
            return total

        return combined

    def _base_second_derivative(self) -> ArrayFn:
        # f'' of the unperturbed part, so that bump terms are never differenced
        if not self.extra_terms:
            return self.f_double_prime
        terms = [(weight, bump.derivative(2)) for weight, bump in self.extra_terms]

        def base(x: np.ndarray) -> np.ndarray:
            total = self.f_double_prime(x)
            for weight, fn in terms:
                total = total - weight * fn(x)
            return total

        return base

    def jets(self, x: np.ndarray, order: int) -> np.ndarray:
        """
        Stack f, f', ..., f^(order) evaluated at x.

        Returns:
            Array of shape (order + 1,) + x.shape
        """
        x = np.asarray(x, dtype=float)
        return np.stack([self.derivative(n)(x) for n in range(order + 1)])


def _difference_derivative(second: ArrayFn, n: int) -> ArrayFn:
    """Third or fourth derivative from central differences of f'' with one Richardson step."""
    h = FALLBACK_STEP

    def third(x: np.ndarray) -> np.ndarray:
        coarse = (second(x + h) - second(x - h)) / (2.0 * h)
        fine = (second(x + h / 2) - second(x - h / 2)) / h
        return fine + (fine - coarse) / 3.0

    def fourth(x: np.ndarray) -> np.ndarray:
        coarse = (second(x + h) - 2.0 * second(x) + second(x - h)) / h ** 2
        fine = (second(x + h / 2) - 2.0 * second(x) + second(x - h / 2)) / (h / 2) ** 2
        return fine + (fine - coarse) / 3.0

    return third if n == 3 else fourth


@dataclass(frozen=True)
class BumpLobe:
    """One Gaussian lobe sign·exp(-((x-m)/((x-m)²-w²))²) supported on (m-w, m+w)."""

    center: float
    half_width: float
    sign: float = 1.0

    @property
    def expression(self) -> sp.Expr:
        t = X - sp.Float(self.center)
        w = sp.Float(self.half_width)
        return sp.Float(self.sign) * sp.exp(-(t / (t ** 2 - w ** 2)) ** 2)

    def derivative(self, n: int) -> ArrayFn:
        fn = _lambdified(_derivative_expr(self.expression, n))
        center, width = self.center, self.half_width

        def evaluate(x: np.ndarray) -> np.ndarray:
            x = np.asarray(x, dtype=float)
            out = np.zeros_like(x)
            t = x - center
            inside = np.abs(t) < width
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                z = np.where(inside, t / (t ** 2 - width ** 2), np.inf)
            live = inside & (z ** 2 < BUMP_EXPONENT_CUTOFF)
            if np.any(live):
                out[live] = np.asarray(fn(x[live]), dtype=float) + np.zeros(np.count_nonzero(live))
            return out

        return evaluate


@dataclass(frozen=True)
class BumpSpec:
    """
    Perturbation g with compact support (c - δ, c + δ).

    g is the sum of its lobes times amplitude; every derivative vanishes at the
    support edges and outside.
    """

    c: float
    delta: float
    lobes: Tuple[BumpLobe, ...]
    amplitude: float = 1.0
    kind: str = "gaussian"

    @property
    def support(self) -> Tuple[float, float]:
        return (self.c - self.delta, self.c + self.delta)

    def derivative(self, n: int) -> ArrayFn:
        parts = [lobe.derivative(n) for lobe in self.lobes]
        amplitude = self.amplitude

        def evaluate(x: np.ndarray) -> np.ndarray:
            x = np.asarray(x, dtype=float)
            total = np.zeros_like(x)
            if amplitude == 0.0:
                return total
            for part in parts:
                total = total + part(x)
            return amplitude * total

        return evaluate

    @property
    def g(self) -> ArrayFn:
        return self.derivative(0)

    @property
    def g_prime(self) -> ArrayFn:
        return self.derivative(1)

    @property
    def g_double_prime(self) -> ArrayFn:
        return self.derivative(2)

    def jets(self, x: np.ndarray, order: int) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.stack([self.derivative(n)(x) for n in range(order + 1)])

    def fits(self, a: float, b: float) -> bool:
        """Whether the support lies inside [a, b], up to rounding of c ± δ."""
        slack = SUPPORT_SLACK * (b - a)
        lo, hi = self.support
        return lo >= a - slack and hi <= b + slack

    def scaled(self, factor: float) -> "BumpSpec":
        """Same bump multiplied by factor (factor 0 gives g ≡ 0)."""
        return BumpSpec(self.c, self.delta, self.lobes, self.amplitude * factor, self.kind)

    def reflected(self, a: float, b: float) -> "BumpSpec":
        """Mirror image x -> a + b - x of the bump."""
        lobes = tuple(
            BumpLobe(a + b - lobe.center, lobe.half_width, lobe.sign) for lobe in reversed(self.lobes)
        )
        return BumpSpec(a + b - self.c, self.delta, lobes, self.amplitude, self.kind)


def make_gaussian_bump(c: float, delta: float) -> BumpSpec:
    """
    Smooth bump exp(-((x-c)/((x-c)²-δ²))²) on (c-δ, c+δ), zero elsewhere.

    Args:
        c: Center
        delta: Half-width of the support

    Returns:
        BumpSpec with g(c) = 1
    """
    if not delta > 0:
        raise ValueError(f"bump half-width must be positive, got {delta}")
    return BumpSpec(c=c, delta=delta, lobes=(BumpLobe(c, delta, 1.0),), kind="gaussian")


def make_mixed_gaussian_bump(c: float, delta: float) -> BumpSpec:
    """
    Positive lobe on (c-δ, c) and negative lobe on (c, c+δ), each of half-width δ/2.

    The result is odd about c.
    """
    if not delta > 0:
        raise ValueError(f"bump half-width must be positive, got {delta}")
    lobes = (BumpLobe(c - delta / 2, delta / 2, 1.0), BumpLobe(c + delta / 2, delta / 2, -1.0))
    return BumpSpec(c=c, delta=delta, lobes=lobes, kind="mixed")


def make_bump(kind: str, c: float, delta: float) -> BumpSpec:
    """Build a bump from its configuration name."""
    if kind == "gaussian":
        return make_gaussian_bump(c, delta)
    if kind == "mixed":
        return make_mixed_gaussian_bump(c, delta)
    raise ConfigError(f"unknown bump kind '{kind}'", diagnostics={"kind": kind})


def expression_profile(
    f: Any,
    a: float,
    b: float,
    f_prime: Any = None,
    f_double_prime: Any = None,
    label: str = "expression",
) -> ProfileSpec:
    """
    Profile from a sympy expression in x.

    Derivatives that are not supplied are obtained by exact differentiation.
    Supplied derivatives are used as given (validate_profile checks them).

    Args:
        f: Expression for f
        a: Left endpoint
        b: Right endpoint
        f_prime: Optional expression for f'
        f_double_prime: Optional expression for f''
        label: Name used in logs and summaries

    Returns:
        ProfileSpec with exact higher derivatives
    """
    if not b > a:
        raise ConfigError(f"interval must satisfy a < b, got [{a}, {b}]", diagnostics={"a": a, "b": b})
    expr = sp.sympify(f)
    first = sp.sympify(f_prime) if f_prime is not None else _derivative_expr(expr, 1)
    second = sp.sympify(f_double_prime) if f_double_prime is not None else _derivative_expr(expr, 2)
    return ProfileSpec(
        a=float(a),
        b=float(b),
        f=lambdify_x(expr),
        f_prime=lambdify_x(first),
        f_double_prime=lambdify_x(second),
        expression=expr,
        label=label,
    )


def constant_profile(alpha: float, a: float, b: float) -> ProfileSpec:
    """Cylinder profile f ≡ α."""
    if not alpha > 0:
        raise ConfigError(f"cylinder radius must be positive, got {alpha}", diagnostics={"alpha": alpha})
    return expression_profile(sp.Float(alpha), a, b, label=f"constant({alpha:g})")


def callable_profile(
    f: ArrayFn,
    f_prime: ArrayFn,
    f_double_prime: ArrayFn,
    a: float,
    b: float,
    label: str = "callable",
) -> ProfileSpec:
    """Profile from three vectorised callables, without exact higher derivatives."""
    if not b > a:
        raise ConfigError(f"interval must satisfy a < b, got [{a}, {b}]", diagnostics={"a": a, "b": b})
    return ProfileSpec(a=float(a), b=float(b), f=f, f_prime=f_prime, f_double_prime=f_double_prime, label=label)


def validation_grid(a: float, b: float, points: int = VALIDATION_POINTS) -> np.ndarray:
    """Uniform grid plus points clustered near both endpoints."""
    length = b - a
    offsets = length * np.array([1e-8, 1e-6, 1e-4, 1e-3, 1e-2])
    grid = np.concatenate([np.linspace(a, b, points), a + offsets, b - offsets])
    return np.unique(grid)


def perturbed_profile(p: ProfileSpec, bump: BumpSpec, epsilon: float) -> ProfileSpec:
    """
    Profile f + εg with summed derivatives; endpoints unchanged.

    Args:
        p: Base profile
        bump: Perturbation g
        epsilon: Perturbation strength

    Returns:
        New ProfileSpec

    Raises:
        PositivityViolation: if f + εg ≤ 0 somewhere on the validation grid
    """
    lo, hi = bump.support
    if not bump.fits(p.a, p.b):
        raise ConfigError(
            f"bump support ({lo:g}, {hi:g}) is not inside [{p.a:g}, {p.b:g}]",
            diagnostics={"support": [lo, hi], "interval": [p.a, p.b]},
        )
    if epsilon == 0.0:
        return p

    g, gp, gpp = bump.g, bump.g_prime, bump.g_double_prime

    def f(x: np.ndarray) -> np.ndarray:
        return p.f(x) + epsilon * g(x)

    def f_prime(x: np.ndarray) -> np.ndarray:
        return p.f_prime(x) + epsilon * gp(x)

    def f_double_prime(x: np.ndarray) -> np.ndarray:
        return p.f_double_prime(x) + epsilon * gpp(x)

    # Keep the bump terms so higher derivatives stay exact
    extra: List[Tuple[float, BumpSpec]] = list(p.extra_terms)
    extra.append((epsilon, bump))

    perturbed = ProfileSpec(
        a=p.a,
        b=p.b,
        f=f,
        f_prime=f_prime,
        f_double_prime=f_double_prime,
        expression=p.expression,
        extra_terms=tuple(extra),
        label=f"{p.label}+{epsilon:g}*{bump.kind}({bump.c:g},{bump.delta:g})",
    )

    grid = validation_grid(p.a, p.b)
    values = perturbed.f(grid)
    if not np.all(values > 0):
        worst = int(np.argmin(values))
        raise PositivityViolation(
            f"perturbed profile is not positive (min {values[worst]:.6g} at x={grid[worst]:.6g})",
            diagnostics={"min": float(values[worst]), "x": float(grid[worst]), "epsilon": epsilon},
        )
    return perturbed


class ProfileReport(BaseModel):
    """Outcome of validate_profile."""

    label: str
    grid_points: int
    positive: bool
    min_value: float
    min_location: float
    first_derivative_residual: float
    second_derivative_residual: float
    derivatives_consistent: bool
    failures: List[str] = []

    @property
    def ok(self) -> bool:
        return not self.failures


def _relative_residual(fd: np.ndarray, supplied: np.ndarray, natural: float) -> float:
    """Largest |fd - supplied| relative to the derivative scale of the grid; 0 when both vanish."""
    scale = max(float(np.max(np.abs(fd))), natural)
    difference = float(np.max(np.abs(fd - supplied)))
    if scale == 0.0:
        return 0.0 if difference == 0.0 else float("inf")
    return difference / scale


def validate_profile(p: ProfileSpec, points: int = VALIDATION_POINTS) -> ProfileReport:
    """
    Check positivity and derivative consistency on a dense grid.

    Central differences (one Richardson step) of f are compared with f', and of
    f' with f''. Residuals are relative, measured against the larger of the
    biggest difference quotient on the grid and max|fn| / (b - a) for the
    function fn being differenced, so the check does not depend on the units of f.

    Args:
        p: Profile to check
        points: Number of uniform grid points

    Returns:
        ProfileReport; failures are listed rather than raised
    """
    grid = validation_grid(p.a, p.b, points)
    failures = []

    with np.errstate(all="ignore"):
        values = p.f(grid)
    finite = np.isfinite(values)
    worst = int(np.argmin(np.where(finite, values, -np.inf)))
    positive = bool(np.all(finite) and np.all(values > 0))
    if not positive:
        failures.append(f"profile not positive: f({grid[worst]:.6g}) = {values[worst]:.6g}")

    h = FALLBACK_STEP * p.length
    inner = grid[(grid >= p.a + 2 * h) & (grid <= p.b - 2 * h)]

    def richardson_difference(fn: ArrayFn) -> np.ndarray:
        coarse = (fn(inner + h) - fn(inner - h)) / (2.0 * h)
        fine = (fn(inner + h / 2) - fn(inner - h / 2)) / h
        return fine + (fine - coarse) / 3.0

    with np.errstate(all="ignore"):
        first = _relative_residual(
            richardson_difference(p.f), p.f_prime(inner), float(np.max(np.abs(values))) / p.length
        )
        second = _relative_residual(
            richardson_difference(p.f_prime), p.f_double_prime(inner),
            float(np.max(np.abs(p.f_prime(grid)))) / p.length,
        )
    first = first if np.isfinite(first) else float("inf")
    second = second if np.isfinite(second) else float("inf")
    consistent = first <= DERIVATIVE_RTOL and second <= DERIVATIVE_RTOL
    if first > DERIVATIVE_RTOL:
        failures.append(f"f' inconsistent with f: residual {first:.3e}")
    if second > DERIVATIVE_RTOL:
        failures.append(f"f'' inconsistent with f': residual {second:.3e}")

    report = ProfileReport(
        label=p.label,
        grid_points=int(grid.size),
        positive=positive,
        min_value=float(values[worst]),
        min_location=float(grid[worst]),
        first_derivative_residual=first,
        second_derivative_residual=second,
        derivatives_consistent=consistent,
        failures=failures,
    )
    logger.info("validated profile %s: %s", p.label, "ok" if report.ok else "; ".join(failures))
    return report


def bump_edge_residual(bump: BumpSpec, samples: int = 64) -> Dict[str, float]:
    """
    Largest |g|, |g'|, |g''| at the support edges and outside the support.

    Returns:
        Dictionary keyed by derivative order name
    """
    lo, hi = bump.support
    outside = np.concatenate([
        [lo, hi],
        lo - bump.delta * np.linspace(1e-9, 1.0, samples),
        hi + bump.delta * np.linspace(1e-9, 1.0, samples),
    ])
    return {
        name: float(np.max(np.abs(bump.derivative(n)(outside))))
        for n, name in enumerate(("g", "g_prime", "g_double_prime"))
    }
