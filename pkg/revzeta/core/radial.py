"""
Radial initial-value problems on the imaginary spectral axis.

X_k(x; iλ) solves

    X'' + p X' + q X = 0,   p = f'/f - f'f''/(1+f'²),   q = -(1+f'²)(λ² + k²/f²),

with X(a) = 0, X'(a) = 1. The growing solution is followed in the gauge
X = e^φ Y, X' = e^φ V with φ' = σ = √(-q), which turns the system into

    Y' = V - σY,   V' = -(p + σ)V + σ²Y,

so the integrator only sees the bounded factor Y. The first-order
perturbation X̂ obeys the same operator with source -G(X', X) and zero data.
"""
import logging
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Optional, Tuple

import numpy as np
import sympy as sp

from revzeta.config import ODE_ATOL, ODE_RTOL
from revzeta.core.profile import BumpSpec, ProfileSpec
from revzeta.core.wkb import F, G, P_COEFF, epsilon_derivative
from revzeta.numerics.ode import dormand_prince
from revzeta.numerics.quadrature import QuadratureSpec, adaptive_quad
from revzeta.numerics.series import log_series

logger = logging.getLogger(__name__)

ArrayFn = Callable[[np.ndarray], np.ndarray]

# Launch offset from the left endpoint, relative to the interval length
LAUNCH_OFFSET = 1e-6

LAM2 = sp.Symbol("lam2", nonnegative=True)
K2 = sp.Symbol("k2", nonnegative=True)
Q_COEFF = -(1 + F[1] ** 2) * (LAM2 + K2 / F[0] ** 2)


@dataclass(frozen=True)
class LogScaledValue:
    """v = sign · exp(log_magnitude); sign 0 means exactly zero."""

    log_magnitude: float
    sign: int

    @property
    def value(self) -> float:
        if self.sign == 0:
            return 0.0
        return self.sign * float(np.exp(self.log_magnitude))

    @classmethod
    def from_float(cls, value: float) -> "LogScaledValue":
        if value == 0.0:
            return cls(0.0, 0)
        return cls(float(np.log(abs(value))), 1 if value > 0 else -1)


@dataclass(frozen=True)
class RadialProblem:
    """Radial equation for mode k at spectral parameter iλ."""

    profile: ProfileSpec
    k: float
    lam: float

    def p_coeff(self, x: np.ndarray) -> np.ndarray:
        f, fp, fpp = self.profile.jets(x, 2)
        return fp / f - fp * fpp / (1.0 + fp ** 2)

    def q_coeff(self, x: np.ndarray) -> np.ndarray:
        f, fp = self.profile.jets(x, 1)
        return -(1.0 + fp ** 2) * (self.lam ** 2 + self.k ** 2 / f ** 2)


@dataclass(frozen=True)
class GCoefficients:
    """G(X'', X', X, x) = first(x) X' + zeroth(x) X; G does not involve X''."""

    first: ArrayFn
    zeroth: ArrayFn

    def __call__(self, x2: np.ndarray, x1: np.ndarray, x0: np.ndarray, x: np.ndarray) -> np.ndarray:
        return self.first(x) * x1 + self.zeroth(x) * x0


@lru_cache(maxsize=None)
def g_expressions() -> Tuple[sp.Expr, sp.Expr]:
    """Coefficients of X' and X in the ε-derivative of the radial operator."""
    return epsilon_derivative(P_COEFF), epsilon_derivative(Q_COEFF)


@lru_cache(maxsize=None)
def _g_functions() -> Tuple[Callable, Callable]:
    first, zeroth = g_expressions()
    args = (F[:3], G[:3], LAM2, K2)
    return (
        sp.lambdify(args, first, modules="numpy", cse=True),
        sp.lambdify(args, zeroth, modules="numpy", cse=True),
    )


def derive_G(p: ProfileSpec, bump: BumpSpec, k: float, lam: float) -> GCoefficients:
    """
    First-order ε-coefficient of the perturbed radial operator on the imaginary axis.

    Args:
        p: Unperturbed profile
        bump: Perturbation g
        k: Mode number
        lam: Spectral parameter λ (the operator is evaluated at iλ)

    Returns:
        GCoefficients with the X' and X coefficient functions
    """
    first_fn, zeroth_fn = _g_functions()

    def coefficient(fn: Callable) -> ArrayFn:
        def evaluate(x: np.ndarray) -> np.ndarray:
            x = np.asarray(x, dtype=float)
            value = fn(tuple(p.jets(x, 2)), tuple(bump.jets(x, 2)), lam ** 2, k ** 2)
            return np.broadcast_to(np.asarray(value, dtype=float), x.shape).copy()
        return evaluate

    return GCoefficients(first=coefficient(first_fn), zeroth=coefficient(zeroth_fn))


@dataclass(frozen=True)
class RadialBatch:
    """
    Radial solutions at x = b for a batch of spectral parameters.

    log|X(b)| = growth + log_reduced; growth = ∫_a^b σ dx carries the dominant
    exponential and is kept apart so callers can cancel it exactly.
    """

    lam: np.ndarray
    k: np.ndarray
    growth: np.ndarray
    log_reduced: np.ndarray
    sign: np.ndarray
    ratio: Optional[np.ndarray]
    steps: int

    @property
    def log_X(self) -> np.ndarray:
        return self.growth + self.log_reduced


def growth_exponent(
    p: ProfileSpec,
    k,
    lam: np.ndarray,
    spec: Optional[QuadratureSpec] = None,
) -> np.ndarray:
    """∫_a^b √((1+f'²)(λ² + k²/f²)) dx for every (k, λ) pair; k and λ broadcast."""
    lam, k = np.broadcast_arrays(np.atleast_1d(np.asarray(lam, dtype=float)), np.asarray(k, dtype=float))
    spec = spec or QuadratureSpec(abs_tol=1e-13, rel_tol=1e-13)
    if not np.any(k):
        arclength, _ = adaptive_quad(lambda x: np.sqrt(1.0 + p.f_prime(x) ** 2), p.a, p.b, spec)
        return lam * arclength

    def sigma(x: np.ndarray) -> np.ndarray:
        f, fp = p.jets(x, 1)
        return np.sqrt((1.0 + fp[:, None] ** 2) * (lam[None, :] ** 2 + k[None, :] ** 2 / f[:, None] ** 2))

    value, _ = adaptive_quad(sigma, p.a, p.b, spec)
    return np.atleast_1d(value)


def edge_exponents(p: ProfileSpec, k: float, lam: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """
    min(∫_a^lo σ, ∫_hi^b σ): decay exponent of the influence of [lo, hi] on the endpoints.

    The perturbation ratio differs from its asymptotic expansion by terms of
    order exp(-2 · edge exponent).
    """
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    pieces = []
    for start, stop in ((p.a, lo), (hi, p.b)):
        if stop <= start:
            pieces.append(np.zeros_like(lam))
            continue
        pieces.append(growth_exponent(replace(p, a=start, b=stop), k, lam))
    return np.minimum(pieces[0], pieces[1])


def _launch_state(h: float, p_a: np.ndarray, sigma2_a: np.ndarray, weight_a: float, orders: int) -> np.ndarray:
    """
    Taylor data at a + h for X(a) = 0, X'(a) = 1 and, for the z-hierarchy, its z-derivatives.

    Row pairs (X_m, X_m') for m = 0..orders-1; X_m starts as (-w)^m h^(2m+1)/(2m+1)!.
    """
    cubic = p_a ** 2 + sigma2_a
    columns = np.broadcast(p_a, sigma2_a).shape
    state = np.zeros((2 * orders,) + columns)
    state[0] = h - p_a * h ** 2 / 2.0 + cubic * h ** 3 / 6.0
    state[1] = 1.0 - p_a * h + cubic * h ** 2 / 2.0
    factorial = 1.0
    for m in range(1, orders):
        factorial *= (2 * m) * (2 * m + 1)
        state[2 * m] = (-weight_a) ** m * h ** (2 * m + 1) / factorial
        state[2 * m + 1] = (-weight_a) ** m * h ** (2 * m) * (2 * m + 1) / factorial
    return state


def solve_radial_batch(
    p: ProfileSpec,
    k,
    lam: np.ndarray,
    bump: Optional[BumpSpec] = None,
    growth: Optional[np.ndarray] = None,
    rtol: float = ODE_RTOL,
    atol: float = ODE_ATOL,
    scale: float = 1.0,
) -> RadialBatch:
    """
    Integrate X_k(·; iλ) (and X̂_k when a bump is given) from a to b for many λ at once.

    Args:
        p: Profile
        k: Mode number, or one per column (may be non-integer for tail estimates)
        lam: Spectral parameters λ ≥ 0, broadcast against k
        bump: Perturbation; when given the ratio X̂/X at b is returned too
        growth: Precomputed ∫σ for each λ; computed by quadrature when omitted
        rtol: Integrator relative tolerance
        atol: Integrator absolute tolerance
        scale: Factor applied to the initial data (X, X')

    Returns:
        RadialBatch with growth, reduced log and optional ratio per λ
    """
    lam, k = np.broadcast_arrays(np.atleast_1d(np.asarray(lam, dtype=float)), np.asarray(k, dtype=float))
    if growth is None:
        growth = growth_exponent(p, k, lam)
    growth = np.broadcast_to(np.asarray(growth, dtype=float), lam.shape)
    columns = lam.size
    lam2 = lam ** 2
    k2 = k ** 2
    with_bump = bump is not None and bump.amplitude != 0.0
    first_fn, zeroth_fn = _g_functions()
    f_fns = tuple(p.derivative(n) for n in range(3))
    g_fns = tuple(bump.derivative(n) for n in range(3)) if with_bump else ()
    support = bump.support if with_bump else (0.0, 0.0)

    def coefficients(x: float):
        point = np.array([x])
        jets = tuple(float(fn(point)[0]) for fn in f_fns)
        f, fp, fpp = jets
        p_val = fp / f - fp * fpp / (1.0 + fp ** 2)
        sigma2 = (1.0 + fp ** 2) * (lam2 + k2 / f ** 2)
        return jets, p_val, sigma2

    def rhs(x: float, y: np.ndarray) -> np.ndarray:
        jets, p_val, sigma2 = coefficients(x)
        sigma = np.sqrt(sigma2)
        out = np.empty_like(y)
        out[0] = y[1] - sigma * y[0]
        out[1] = -(p_val + sigma) * y[1] + sigma2 * y[0]
        if with_bump:
            source = 0.0
            if support[0] < x < support[1]:
                point = np.array([x])
                g_jets = tuple(float(fn(point)[0]) for fn in g_fns)
                c1 = first_fn(jets, g_jets, lam2, k2)
                c0 = zeroth_fn(jets, g_jets, lam2, k2)
                source = c1 * y[1] + c0 * y[0]
            out[2] = y[3] - sigma * y[2]
            out[3] = -(p_val + sigma) * y[3] + sigma2 * y[2] - source
        return out

    h = LAUNCH_OFFSET * p.length
    _, p_a, sigma2_a = coefficients(p.a)
    _, _, sigma2_mid = coefficients(p.a + h / 2.0)
    phi_h = h * np.sqrt(sigma2_mid)

    # Reduced variables start at O(1); the factor h·e^{-φ(a+h)} is carried in log form
    rows = 4 if with_bump else 2
    y0 = np.zeros((rows, columns))
    y0[:2] = scale * _launch_state(h, p_a, sigma2_a, 0.0, 1) / h
    result = dormand_prince(
        rhs, p.a + h, p.b, y0, rtol=rtol, atol=atol,
        initial_log_scale=np.log(h) - phi_h,
    )
    Y = result.y[0]
    log_reduced = np.log(np.abs(Y)) + result.log_scale
    if with_bump:
        ratio = result.y[2] / Y
    elif bump is not None:
        ratio = np.zeros(columns)
    else:
        ratio = None
    logger.debug("radial batch k<=%g: %d columns, %d steps", float(np.max(k)), columns, result.steps)
    return RadialBatch(
        lam=lam,
        k=np.array(k),
        growth=np.array(growth),
        log_reduced=log_reduced,
        sign=np.sign(Y).astype(int),
        ratio=ratio,
        steps=result.steps,
    )


def solve_X(rp: RadialProblem, tol: Optional[QuadratureSpec] = None) -> LogScaledValue:
    """
    X_k(b; iλ) for one radial problem.

    Args:
        rp: Radial problem
        tol: Requested accuracy; its relative tolerance tightens the integrator

    Returns:
        LogScaledValue of X_k(b; iλ)
    """
    rtol = min(ODE_RTOL, tol.rel_tol) if tol is not None else ODE_RTOL
    batch = solve_radial_batch(rp.profile, rp.k, np.array([rp.lam]), rtol=rtol)
    return LogScaledValue(float(batch.log_X[0]), int(batch.sign[0]))


def solve_perturbation_ratio(
    rp: RadialProblem,
    bump: BumpSpec,
    tol: Optional[QuadratureSpec] = None,
    scale: float = 1.0,
) -> float:
    """
    X̂_k(b; iλ) / X_k(b; iλ) from the augmented system (X, X', X̂, X̂').

    Args:
        rp: Radial problem of the unperturbed profile
        bump: Perturbation g
        tol: Requested accuracy
        scale: Factor applied to the initial data; the ratio does not depend on it

    Returns:
        The ratio at x = b
    """
    rtol = min(ODE_RTOL, tol.rel_tol) if tol is not None else ODE_RTOL
    batch = solve_radial_batch(rp.profile, rp.k, np.array([rp.lam]), bump=bump, rtol=rtol, scale=scale)
    return float(batch.ratio[0])


def taylor_coefficients(
    p: ProfileSpec,
    ks: np.ndarray,
    M: int,
    rtol: float = ODE_RTOL,
    atol: float = ODE_ATOL,
) -> np.ndarray:
    """
    Taylor coefficients of log X_k(b; √z) / X_k(b; 0) in z = λ² for several modes.

    The z-derivatives X_m = (1/m!) ∂^m X / ∂z^m at z = 0 satisfy
    X_m'' + p X_m' - σ² X_m = -(1+f'²) X_{m-1} with σ = k√(1+f'²)/f, and are
    integrated together in the same gauge as X.

    Args:
        p: Profile
        ks: Mode numbers, one column each
        M: Highest order
        rtol: Integrator relative tolerance
        atol: Integrator absolute tolerance

    Returns:
        Array (len(ks), M + 1); entry m is the z^m coefficient of the logarithm
    """
    ks = np.atleast_1d(np.asarray(ks, dtype=float))
    k2 = ks ** 2
    f_fns = tuple(p.derivative(n) for n in range(3))
    orders = M + 1

    def coefficients(x: float):
        point = np.array([x])
        f, fp, fpp = (float(fn(point)[0]) for fn in f_fns)
        weight = 1.0 + fp ** 2
        p_val = fp / f - fp * fpp / weight
        return p_val, weight * k2 / f ** 2, weight

    def rhs(x: float, y: np.ndarray) -> np.ndarray:
        p_val, sigma2, weight = coefficients(x)
        sigma = np.sqrt(sigma2)
        out = np.empty_like(y)
        for m in range(orders):
            Y, V = y[2 * m], y[2 * m + 1]
            out[2 * m] = V - sigma * Y
            out[2 * m + 1] = -(p_val + sigma) * V + sigma2 * Y
            if m:
                out[2 * m + 1] -= weight * y[2 * m - 2]
        return out

    h = LAUNCH_OFFSET * p.length
    p_a, sigma2_a, weight_a = coefficients(p.a)
    _, sigma2_mid, _ = coefficients(p.a + h / 2.0)
    phi_h = h * np.sqrt(sigma2_mid)
    y0 = _launch_state(h, np.full(ks.shape, p_a), sigma2_a, weight_a, orders) / h
    result = dormand_prince(rhs, p.a + h, p.b, y0, rtol=rtol, atol=atol, initial_log_scale=np.log(h) - phi_h)

    e = result.y[0::2] / result.y[0]
    logger.debug("z-hierarchy to order %d for %d modes: %d steps", M, ks.size, result.steps)
    return log_series(e.T)
