"""
Mode-series summation with tail control, and Richardson extrapolation.
"""
import logging
import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from revzeta.config import K_CAP
from revzeta.core.errors import TailBoundUnmet
from revzeta.numerics.quadrature import gauss_legendre

logger = logging.getLogger(__name__)

TermFn = Callable[[np.ndarray], np.ndarray]
TailFn = Callable[[int], float]

# Points of the fixed Gauss-Legendre rule per decade of the continuous mode variable
POINTS_PER_DECADE = 8
MAX_TAIL_DECADES = 12


class SeriesResult(BaseModel):
    """Partial sum of a mode series with its tail estimate R_K."""

    sum: float
    K_used: int = Field(ge=1)
    tail_bound: float = Field(ge=0)
    terms: List[float] = Field(default_factory=list)


def checkpoints(K_cap: int, first: int = 2, growth: float = 1.25) -> List[int]:
    """
    Truncation indices at which the tail is examined: every k up to 8, then geometric.

    Args:
        K_cap: Largest truncation allowed
        first: Smallest truncation examined
        growth: Ratio between consecutive checkpoints past 8

    Returns:
        Increasing list of indices ending at K_cap
    """
    points = list(range(first, min(8, K_cap) + 1))
    K = points[-1] if points else first
    while K < K_cap:
        K = min(K_cap, max(K + 1, int(math.ceil(K * growth))))
        points.append(K)
    return points or [K_cap]


def power_law_tail(terms: Sequence[float]) -> float:
    """
    Extrapolate Σ_{k>K} t_k from t_{K/2} and t_K assuming |t_k| ~ C k^{-p}.

    Returns infinity when the terms do not decay faster than 1/k.
    """
    K = len(terms)
    if K < 2:
        return math.inf
    late, mid = abs(terms[K - 1]), abs(terms[K // 2 - 1])
    if late == 0.0:
        return 0.0
    if mid <= late:
        return math.inf
    p = math.log(mid / late) / math.log(K / (K // 2))
    if p <= 1.05:
        return math.inf
    return late * K / (p - 1.0)


def integral_tail(summand: TermFn, K: float, target_tol: float = 0.0) -> float:
    """
    Estimate |∫_K^∞ t(κ) dκ| for a summand defined at continuous κ.

    The integral is done decade by decade in log κ with a fixed Gauss-Legendre
    rule; the remainder past the last decade is extrapolated from the decay of
    the last two decades.

    Args:
        summand: Vectorised summand of the continuous mode variable
        K: Truncation index
        target_tol: Stop once a decade contributes less than this

    Returns:
        Absolute value of the estimated tail
    """
    total = 0.0
    contributions: List[float] = []
    lo = math.log10(max(K, 1.0))
    for _ in range(MAX_TAIL_DECADES):
        sampled: Dict[str, np.ndarray] = {}

        def in_log_variable(s: np.ndarray) -> np.ndarray:
            kappa = 10.0 ** s
            values = np.asarray(summand(kappa), dtype=float)
            sampled["kappa"], sampled["values"] = kappa, values
            return math.log(10.0) * values * kappa

        piece = float(gauss_legendre(in_log_variable, lo, lo + 1.0, POINTS_PER_DECADE))
        kappa, values = sampled["kappa"], sampled["values"]
        total += piece
        contributions.append(piece)

        # Summand must not grow in magnitude across the sampled decade
        magnitudes = np.abs(values)
        if magnitudes[0] > 0 and magnitudes[-1] > magnitudes[0] * (1.0 + 1e-8):
            raise TailBoundUnmet(
                f"mode summand grows between k={kappa[0]:.3g} and k={kappa[-1]:.3g}",
                diagnostics={"first": float(values[0]), "last": float(values[-1])},
            )
        if piece == 0.0:
            return abs(total)
        if len(contributions) >= 2:
            if contributions[-2] == 0.0:
                return abs(total)
            ratio = abs(contributions[-1] / contributions[-2])
            if ratio >= 1.0:
                return math.inf
            # Geometric extrapolation of the decades not yet visited
            remaining = contributions[-1] * ratio / (1.0 - ratio)
            if abs(remaining) <= max(target_tol * 1e-2, 1e-3 * abs(total)):
                return abs(total + remaining)
        lo += 1.0

    return math.inf


def series_with_tail(
    term: TermFn,
    tail: Optional[TailFn] = None,
    target_tol: float = 1e-7,
    K_cap: int = K_CAP,
    fixed_K: Optional[int] = None,
) -> SeriesResult:
    """
    Sum t_1 + t_2 + ... until the tail estimate drops below target_tol.

    Terms are requested in batches (one array of k values per checkpoint) and
    summed in ascending k. A cheap power-law extrapolation screens each
    checkpoint; the supplied tail estimator is only consulted once the screen
    passes.

    Args:
        term: Vectorised term, called with an integer array of k values
        tail: Estimator of |Σ_{k>K} t_k|; defaults to the power-law extrapolation
        target_tol: Required tail bound
        K_cap: Largest truncation allowed
        fixed_K: Sum exactly this many terms and only report the tail

    Returns:
        SeriesResult with the partial sum, K used and the tail bound
    """
    terms: List[float] = []

    def extend(K: int) -> None:
        if K > len(terms):
            ks = np.arange(len(terms) + 1, K + 1)
            values = np.asarray(term(ks), dtype=float).reshape(-1)
            terms.extend(float(v) for v in values)

    def partial() -> float:
        total = 0.0
        for value in terms:
            total += value
        return total

    def estimate(K: int) -> float:
        screen = power_law_tail(terms[:K])
        if tail is None or screen > target_tol:
            return screen
        return abs(tail(K))

    if fixed_K is not None:
        extend(fixed_K)
        bound = estimate(fixed_K) if tail is None else abs(tail(fixed_K))
        logger.debug("series with fixed K=%d: tail %.3e", fixed_K, bound)
        return SeriesResult(sum=partial(), K_used=fixed_K, tail_bound=bound, terms=terms)

    bound = math.inf
    for K in checkpoints(K_cap):
        extend(K)
        bound = estimate(K)
        logger.debug("series checkpoint K=%d: partial %.15g, tail %.3e", K, partial(), bound)
        if bound <= target_tol:
            return SeriesResult(sum=partial(), K_used=K, tail_bound=bound, terms=terms)

    raise TailBoundUnmet(
        f"tail bound {bound:.3e} above target {target_tol:.3e} at K_cap={K_cap}",
        diagnostics={"K_cap": K_cap, "tail_bound": bound, "last_term": terms[-1] if terms else None},
        partial=partial(),
    )


def richardson(values: Sequence[float], ratio: float = 2.0, order: float = 2.0) -> Tuple[float, float]:
    """
    Richardson-extrapolate a sequence computed at steps h, h/ratio, h/ratio², ...

    Args:
        values: Approximations, coarsest first (at least two)
        ratio: Step reduction between consecutive values
        order: Leading error order used for the extrapolation

    Returns:
        Tuple of (extrapolated value, observed order); the observed order needs
        three values and is nan otherwise
    """
    if len(values) < 2:
        raise ValueError("richardson needs at least two values")
    factor = ratio ** order
    extrapolated = values[-1] + (values[-1] - values[-2]) / (factor - 1.0)

    observed = math.nan
    if len(values) >= 3:
        d1 = values[-2] - values[-3]
        d2 = values[-1] - values[-2]
        if d1 != 0.0 and d2 != 0.0:
            observed = math.log(abs(d1 / d2)) / math.log(ratio)
    return extrapolated, observed


def central_difference(fn: Callable[[float], float], x: float, steps: Sequence[float]) -> Dict[str, float]:
    """
    Richardson-extrapolated central difference of a scalar function.

    Args:
        fn: Function of one variable
        x: Point of differentiation
        steps: Decreasing step sizes with a constant ratio

    Returns:
        Dictionary with the extrapolated derivative, observed order and the raw differences
    """
    raw = [(fn(x + h) - fn(x - h)) / (2.0 * h) for h in steps]
    ratio = steps[0] / steps[1] if len(steps) > 1 else 2.0
    if len(raw) == 1:
        return {"value": raw[0], "order": math.nan, "raw": raw}
    value, observed = richardson(raw, ratio=ratio, order=2.0)
    return {"value": value, "order": observed, "raw": raw}


def log_series(e: np.ndarray) -> np.ndarray:
    """
    Coefficients of log(1 + Σ_{m≥1} e_m z^m) up to the order of e.

    Args:
        e: Array (..., M + 1); e[..., 0] is ignored (taken as 1)

    Returns:
        Array of the same shape; entry 0 is zero
    """
    e = np.asarray(e, dtype=float)
    M = e.shape[-1] - 1
    L = np.zeros_like(e)
    for m in range(1, M + 1):
        acc = e[..., m].copy()
        for j in range(1, m):
            acc = acc - j * L[..., j] * e[..., m - j] / m
        L[..., m] = acc
    return L
