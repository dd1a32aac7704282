"""
WKB coefficients of the logarithmic derivative of the radial solutions.

For k = 0 the expansion S ~ Σ s_i λ^{-i} and for k ≠ 0 the uniform expansion
W ~ Σ w_i k^{-i} (with λ = uk) obey the same recursion

    c_{i+1} = -(c_i' + p c_i + Σ_{j=0}^{i} c_j c_{i-j}) / (2 c_{-1}),

with p = f'/f - f'f''/(1+f'²) and c_{-1} = √(1+f'²) or √((1+u²f²)(1+f'²))/f.
The recursion is run once, symbolically, on jet symbols f0, f1, ... standing
for f, f', ...; x-derivatives become the total derivative Σ f_{j+1} ∂/∂f_j and
ε-derivatives (f -> f + εg) become Σ g_j ∂/∂f_j. The resulting expressions are
lambdified and evaluated on numpy arrays of jets.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
import sympy as sp

from revzeta.core.profile import BumpSpec, ProfileSpec
from revzeta.numerics.quadrature import QuadratureSpec, adaptive_quad
from revzeta.numerics.series import log_series

logger = logging.getLogger(__name__)

ArrayFn = Callable[[np.ndarray], np.ndarray]

MAX_JET = 10
F = sp.symbols(f"f0:{MAX_JET}", real=True)
G = sp.symbols(f"g0:{MAX_JET}", real=True)
U = sp.Symbol("u", nonnegative=True)

P_COEFF = F[1] / F[0] - F[1] * F[2] / (1 + F[1] ** 2)


class SeriesKind(str, Enum):
    S_SERIES = "S_SERIES"
    W_SERIES = "W_SERIES"


def total_derivative(expr: sp.Expr) -> sp.Expr:
    """d/dx of an expression in the jet symbols."""
    return sp.Add(*[sp.diff(expr, F[j]) * F[j + 1] for j in range(MAX_JET - 1) if expr.has(F[j])])


def epsilon_derivative(expr: sp.Expr) -> sp.Expr:
    """d/dε at ε = 0 of an expression after f -> f + εg."""
    return sp.Add(*[sp.diff(expr, F[j]) * G[j] for j in range(MAX_JET) if expr.has(F[j])])


def leading_coefficient(kind: SeriesKind) -> sp.Expr:
    if kind == SeriesKind.S_SERIES:
        return sp.sqrt(1 + F[1] ** 2)
    return sp.sqrt((1 + U ** 2 * F[0] ** 2) * (1 + F[1] ** 2)) / F[0]


@lru_cache(maxsize=None)
def coefficient_expressions(kind: SeriesKind, order: int) -> Tuple[sp.Expr, ...]:
    """
    Symbolic coefficients c_{-1}, ..., c_{order-2}.

    Entry i + 1 of the tuple is c_i; it involves jets up to f^(i+2).
    """
    if order < 1 or order + 1 > MAX_JET:
        raise ValueError(f"WKB order must lie in [1, {MAX_JET - 1}], got {order}")
    leading = leading_coefficient(kind)
    coefficients = [leading]
    for i in range(-1, order - 2):
        current = coefficients[i + 1]
        convolution = sp.Add(*[coefficients[j + 1] * coefficients[i - j + 1] for j in range(0, i + 1)])
        following = -(total_derivative(current) + P_COEFF * current + convolution) / (2 * leading)
        coefficients.append(following)
    logger.debug("built %s coefficients up to order %d", kind.value, order)
    return tuple(coefficients)


@lru_cache(maxsize=None)
def epsilon_expressions(kind: SeriesKind, order: int) -> Tuple[sp.Expr, ...]:
    """∂_ε c_i at ε = 0 for i = -1, ..., order-2, in jets f_j and g_j."""
    return tuple(epsilon_derivative(expr) for expr in coefficient_expressions(kind, order))


def _broadcast(values: Sequence, shape: Tuple[int, ...]) -> np.ndarray:
    return np.stack([np.broadcast_to(np.asarray(v, dtype=float), shape) for v in values])


@lru_cache(maxsize=None)
def _value_function(kind: SeriesKind, order: int) -> Callable:
    return sp.lambdify((F[: order + 1], U), list(coefficient_expressions(kind, order)), modules="numpy", cse=True)


@lru_cache(maxsize=None)
def _epsilon_function(kind: SeriesKind, order: int) -> Callable:
    return sp.lambdify(
        (F[: order + 1], G[: order + 1], U),
        list(epsilon_expressions(kind, order)),
        modules="numpy",
        cse=True,
    )


def evaluate_coefficients(
    p: ProfileSpec,
    kind: SeriesKind,
    order: int,
    x: np.ndarray,
    u: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Evaluate c_{-1..order-2} at the points x (and, for W, at every u).

    Returns:
        Array of shape (order, len(x)) or (order, len(x), len(u))
    """
    x = np.asarray(x, dtype=float)
    jets = p.jets(x, order)
    if u is None:
        u_arg, shape = 0.0, x.shape
    else:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        jets = jets[..., None]
        u_arg, shape = u[None, :], x.shape + u.shape
    with np.errstate(divide="ignore", invalid="ignore"):
        values = _value_function(kind, order)(tuple(jets), u_arg)
    return _broadcast(values, shape)


def evaluate_epsilon_coefficients(
    p: ProfileSpec,
    bump: BumpSpec,
    kind: SeriesKind,
    order: int,
    x: np.ndarray,
    u: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Evaluate ∂_ε c_{-1..order-2}; same shapes as evaluate_coefficients."""
    x = np.asarray(x, dtype=float)
    jets = p.jets(x, order)
    g_jets = bump.jets(x, order)
    if u is None:
        u_arg, shape = 0.0, x.shape
    else:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        jets, g_jets = jets[..., None], g_jets[..., None]
        u_arg, shape = u[None, :], x.shape + u.shape
    with np.errstate(divide="ignore", invalid="ignore"):
        values = _epsilon_function(kind, order)(tuple(jets), tuple(g_jets), u_arg)
    return _broadcast(values, shape)


def _integrate_table(
    integrand: Callable[[np.ndarray], np.ndarray],
    lo: float,
    hi: float,
    rows: int,
    columns: int,
    spec: QuadratureSpec,
) -> Tuple[np.ndarray, np.ndarray]:
    """Integrate a (rows, n, columns) family at once; returns (columns, rows) arrays."""

    def flat(x: np.ndarray) -> np.ndarray:
        values = integrand(x)
        if values.ndim == 2:
            values = values[..., None]
        return np.moveaxis(values, 1, 0).reshape(x.size, rows * columns)

    value, error = adaptive_quad(flat, lo, hi, spec, min_panels=2)
    value = np.asarray(value).reshape(rows, columns).T
    error = np.asarray(error).reshape(rows, columns).T
    return value, error


def coefficient_integrals(
    p: ProfileSpec,
    kind: SeriesKind,
    order: int,
    u: Optional[np.ndarray] = None,
    spec: Optional[QuadratureSpec] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    ∫_a^b c_i dx for i = -1..order-2, for every u at once.

    Returns:
        Tuple (integrals, errors), each of shape (len(u), order), or (order,) without u
    """
    spec = spec or QuadratureSpec()
    columns = 1 if u is None else np.atleast_1d(u).size
    value, error = _integrate_table(
        lambda x: evaluate_coefficients(p, kind, order, x, u),
        p.a, p.b, order, columns, spec,
    )
    if u is None:
        return value[0], error[0]
    return value, error


def epsilon_integrals(
    p: ProfileSpec,
    bump: BumpSpec,
    kind: SeriesKind,
    order: int,
    u: Optional[np.ndarray] = None,
    spec: Optional[QuadratureSpec] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """∫ ∂_ε c_i dx over the bump support; shapes as coefficient_integrals."""
    spec = spec or QuadratureSpec()
    columns = 1 if u is None else np.atleast_1d(u).size
    lo, hi = max(bump.support[0], p.a), min(bump.support[1], p.b)
    if bump.amplitude == 0.0 or not hi > lo:
        shape = (order,) if u is None else (columns, order)
        return np.zeros(shape), np.zeros(shape)
    value, error = _integrate_table(
        lambda x: evaluate_epsilon_coefficients(p, bump, kind, order, x, u),
        lo, hi, order, columns, spec,
    )
    if u is None:
        return value[0], error[0]
    return value, error


@dataclass(frozen=True)
class CoefficientTable:
    """
    WKB coefficients c_{-1..N-2} with their integrals over [a, b].

    For ε-derivative tables the coefficients are ∂_ε c_i at ε = 0.
    """

    kind: SeriesKind
    order: int
    u: Optional[float]
    coefficients: Tuple[ArrayFn, ...]
    integrals: Tuple[float, ...]
    errors: Tuple[float, ...]
    boundary: Tuple[float, ...]
    epsilon: bool = False

    def __post_init__(self):
        if len(self.coefficients) != self.order or len(self.integrals) != self.order:
            raise ValueError("coefficient table must hold entries for i = -1..N-2")
        if (self.kind == SeriesKind.W_SERIES) != (self.u is not None):
            raise ValueError("u is required exactly for W_SERIES tables")

    def coefficient(self, i: int) -> ArrayFn:
        return self.coefficients[i + 1]

    def integral(self, i: int) -> float:
        return self.integrals[i + 1]


def _table_functions(evaluate: Callable[[np.ndarray], np.ndarray], order: int) -> Tuple[ArrayFn, ...]:
    def entry(index: int) -> ArrayFn:
        def fn(x: np.ndarray) -> np.ndarray:
            x = np.asarray(x, dtype=float)
            return evaluate(np.atleast_1d(x))[index].reshape(x.shape)
        return fn

    return tuple(entry(index) for index in range(order))


def s_coefficients(p: ProfileSpec, N: int, spec: Optional[QuadratureSpec] = None) -> CoefficientTable:
    """
    k = 0 table s_{-1}, ..., s_{N-2} and their integrals.

    Args:
        p: Profile
        N: Number of retained orders
        spec: Quadrature tolerances

    Returns:
        CoefficientTable of kind S_SERIES
    """
    kind = SeriesKind.S_SERIES
    integrals, errors = coefficient_integrals(p, kind, N, spec=spec)
    boundary = evaluate_coefficients(p, kind, N, np.array([p.a]))[:, 0]
    return CoefficientTable(
        kind=kind,
        order=N,
        u=None,
        coefficients=_table_functions(lambda x: evaluate_coefficients(p, kind, N, x), N),
        integrals=tuple(float(v) for v in integrals),
        errors=tuple(float(v) for v in errors),
        boundary=tuple(float(v) for v in boundary),
    )


def w_coefficients(p: ProfileSpec, N: int, u: float, spec: Optional[QuadratureSpec] = None) -> CoefficientTable:
    """
    k ≠ 0 table w_{-1}, ..., w_{N-2} at fixed u and their integrals.

    Args:
        p: Profile
        N: Number of retained orders
        u: Ratio λ/k (u ≥ 0)
        spec: Quadrature tolerances

    Returns:
        CoefficientTable of kind W_SERIES
    """
    if u < 0:
        raise ValueError(f"u must be nonnegative, got {u}")
    kind = SeriesKind.W_SERIES
    u_arr = np.array([float(u)])
    integrals, errors = coefficient_integrals(p, kind, N, u=u_arr, spec=spec)
    boundary = evaluate_coefficients(p, kind, N, np.array([p.a]), u_arr)[:, 0, 0]
    return CoefficientTable(
        kind=kind,
        order=N,
        u=float(u),
        coefficients=_table_functions(lambda x: evaluate_coefficients(p, kind, N, x, u_arr)[..., 0], N),
        integrals=tuple(float(v) for v in integrals[0]),
        errors=tuple(float(v) for v in errors[0]),
        boundary=tuple(float(v) for v in boundary),
    )


def epsilon_derivative_tables(
    p: ProfileSpec,
    bump: BumpSpec,
    N: int,
    u: Optional[float] = None,
    spec: Optional[QuadratureSpec] = None,
) -> CoefficientTable:
    """
    Table of ∂_ε s_i (u is None) or ∂_ε w_i (u given) at ε = 0, with integrals.

    The derivatives are exact: they come from differentiating the symbolic
    coefficients along the bump jets.
    """
    kind = SeriesKind.S_SERIES if u is None else SeriesKind.W_SERIES
    u_arr = None if u is None else np.array([float(u)])
    integrals, errors = epsilon_integrals(p, bump, kind, N, u=u_arr, spec=spec)
    if u_arr is not None:
        integrals, errors = integrals[0], errors[0]

    def evaluate(x: np.ndarray) -> np.ndarray:
        values = evaluate_epsilon_coefficients(p, bump, kind, N, x, u_arr)
        return values if u_arr is None else values[..., 0]

    boundary = evaluate(np.array([p.a]))[:, 0]
    return CoefficientTable(
        kind=kind,
        order=N,
        u=None if u is None else float(u),
        coefficients=_table_functions(evaluate, N),
        integrals=tuple(float(v) for v in integrals),
        errors=tuple(float(v) for v in errors),
        boundary=tuple(float(v) for v in boundary),
        epsilon=True,
    )


def boundary_log_factor(boundary: np.ndarray, t: np.ndarray, N: int) -> np.ndarray:
    """
    -log(2 t c_{-1}(a)) - log(1 + Σ_{j≥1, 2j≤N-2} c_{2j-1}(a)/c_{-1}(a) t^{-2j}).

    Args:
        boundary: Values c_{-1}(a), c_0(a), ... along the first axis (any trailing shape)
        t: Large parameter (λ for S, k for W), broadcast against the trailing shape
        N: Truncation order

    Returns:
        log A⁺ or log B⁺
    """
    boundary = np.asarray(boundary, dtype=float)
    t = np.asarray(t, dtype=float)
    leading = boundary[0]
    correction = np.zeros(np.broadcast(leading, t).shape)
    j = 1
    while 2 * j <= N - 2:
        correction = correction + boundary[2 * j] / leading * t ** (-2.0 * j)
        j += 1
    return -np.log(2.0 * t * leading) - np.log1p(correction)


def log_A_plus(p: ProfileSpec, lam, N: int):
    """
    log A⁺ for the k = 0 expansion at spectral parameter λ > 0.

    Args:
        p: Profile
        lam: λ (scalar or array)
        N: Truncation order

    Returns:
        log A⁺, with the shape of lam
    """
    boundary = evaluate_coefficients(p, SeriesKind.S_SERIES, max(N, 1), np.array([p.a]))[:, 0]
    result = boundary_log_factor(boundary, lam, N)
    return float(result) if np.ndim(result) == 0 else result


def log_B_plus(p: ProfileSpec, k, u, N: int):
    """
    log B⁺ for the uniform k ≠ 0 expansion.

    Args:
        p: Profile
        k: Mode number (≥ 1)
        u: λ/k (scalar or array)
        N: Truncation order

    Returns:
        log B⁺, with the broadcast shape of k and u
    """
    u_arr = np.atleast_1d(np.asarray(u, dtype=float))
    boundary = evaluate_coefficients(p, SeriesKind.W_SERIES, max(N, 1), np.array([p.a]), u_arr)[:, 0, :]
    result = boundary_log_factor(boundary, np.asarray(k, dtype=float), N)
    if np.ndim(u) == 0:
        result = result.reshape(np.shape(k)) if np.ndim(k) else result[0]
    return float(result) if np.ndim(result) == 0 else result


def boundary_log_series(boundary: np.ndarray, t: np.ndarray, N: int) -> np.ndarray:
    """
    log A⁺ (or log B⁺) expanded in powers of t^{-2} through t^{-(N-2)}.

    The logarithm of the boundary sum is replaced by its power series, so every
    order matches one of the asymptotic terms.

    Args:
        boundary: Values c_{-1}(a), c_0(a), ... along the first axis
        t: Large parameter, broadcast against the trailing shape
        N: Truncation order

    Returns:
        -log(2 t c_{-1}(a)) minus the series of the boundary correction
    """
    boundary = np.asarray(boundary, dtype=float)
    t = np.asarray(t, dtype=float)
    leading = boundary[0]
    result = -np.log(2.0 * t * leading)
    J = (N - 2) // 2
    if J < 1:
        return result
    e = np.stack([np.ones_like(leading)] + [boundary[2 * j] / leading for j in range(1, J + 1)], axis=-1)
    L = log_series(e)
    for j in range(1, J + 1):
        result = result - L[..., j] * t ** (-2.0 * j)
    return result


def remainder_coefficients(
    integrals: np.ndarray,
    boundary: np.ndarray,
    N: int,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Coefficients of t^{-(N-1)} and t^{-N} in log X - (log A⁺ or log B⁺ series) - Σ_{i=-1}^{N-2} t^{-i} ∫c_i.

    Needs an extended table, with entries up to c_N.

    Args:
        integrals: ∫c_i for i = -1..N along the first axis
        boundary: c_i(a) for i = -1..N along the first axis
        N: Truncation order of the subtraction

    Returns:
        Tuple of the two coefficients, with the trailing shape of the tables
    """
    integrals = np.asarray(integrals, dtype=float)
    boundary = np.asarray(boundary, dtype=float)
    leading = boundary[0]
    J = N // 2
    e = np.stack([np.ones_like(leading)] + [boundary[2 * j] / leading for j in range(1, J + 1)], axis=-1)
    L = log_series(e)
    coefficients = [np.array(integrals[N]), np.array(integrals[N + 1])]
    for offset, power in enumerate((N - 1, N)):
        if power % 2 == 0:
            coefficients[offset] = coefficients[offset] - L[..., power // 2]
    return coefficients[0], coefficients[1]


def asymptotic_remainder(integrals: np.ndarray, boundary: np.ndarray, t: np.ndarray, N: int) -> np.ndarray:
    """
    Leading part of the remainder of the order-N subtraction at large t.

    Args:
        integrals: ∫c_i for i = -1..N along the first axis
        boundary: c_i(a) for i = -1..N along the first axis
        t: Large parameter (λ for S, k for W)
        N: Truncation order of the subtraction

    Returns:
        Remainder estimate with the broadcast shape
    """
    t = np.asarray(t, dtype=float)
    first, second = remainder_coefficients(integrals, boundary, N)
    return first * t ** (-(N - 1.0)) + second * t ** (-float(N))


def remainder_last_order(integrals: np.ndarray, boundary: np.ndarray, t: np.ndarray, N: int) -> np.ndarray:
    """Magnitude of the t^{-N} part of asymptotic_remainder, used to judge its accuracy."""
    t = np.asarray(t, dtype=float)
    _, second = remainder_coefficients(integrals, boundary, N)
    return np.abs(second * t ** (-float(N)))


def epsilon_remainder(epsilon_integrals_: np.ndarray, t: np.ndarray, N: int) -> np.ndarray:
    """Next two orders Σ_{i=N-1}^{N} t^{-i} ∫∂_ε c_i of the subtracted perturbation ratio."""
    t = np.asarray(t, dtype=float)
    values = np.asarray(epsilon_integrals_, dtype=float)
    return values[N] * t ** (-(N - 1.0)) + values[N + 1] * t ** (-float(N))
