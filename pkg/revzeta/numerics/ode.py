"""
Batched Dormand-Prince 5(4) integrator for linear systems.

The state is a matrix of shape (rows, columns): rows are the unknowns of one
system, columns are independent copies of the system (one per quadrature node
or mode number) that share the step sequence. Columns whose magnitude exceeds
exp(RENORMALIZATION_EXPONENT) are rescaled and the logarithm of the scale is
accumulated, so linear homogeneous systems can be followed through arbitrary
growth.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from revzeta.config import ODE_ATOL, ODE_MAX_STEPS, ODE_RTOL, RENORMALIZATION_EXPONENT
from revzeta.core.errors import StiffnessFailure, ToleranceUnmet

logger = logging.getLogger(__name__)

RhsFn = Callable[[float, np.ndarray], np.ndarray]

# Dormand-Prince 5(4) tableau
C = np.array([0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0])
A = [
    [],
    [1.0 / 5.0],
    [3.0 / 40.0, 9.0 / 40.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
]
# Fifth-order weights (equal to the last row of A, which gives first-same-as-last)
B = np.array([35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0])
# Difference between the fifth- and fourth-order weights
E = np.array([
    71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0,
    -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0,
])

# PI step-size control
SAFETY = 0.9
ALPHA = 0.17
BETA = 0.04
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0


@dataclass(frozen=True)
class OdeResult:
    """Final state of a batched integration."""

    y: np.ndarray
    log_scale: np.ndarray
    steps: int
    rejected: int


def _error_norm(
    err: np.ndarray,
    y_old: np.ndarray,
    y_new: np.ndarray,
    rtol: float,
    atol: float,
    groups: Sequence[Sequence[int]],
) -> float:
    """RMS error per column relative to the magnitude of each row group, maximised over columns."""
    scale = np.empty_like(err)
    for rows in groups:
        magnitude = np.maximum(np.max(np.abs(y_old[rows]), axis=0), np.max(np.abs(y_new[rows]), axis=0))
        scale[rows] = atol + rtol * magnitude
    per_column = np.sqrt(np.mean((err / scale) ** 2, axis=0))
    return float(np.max(per_column))


def dormand_prince(
    rhs: RhsFn,
    x0: float,
    x1: float,
    y0: np.ndarray,
    rtol: float = ODE_RTOL,
    atol: float = ODE_ATOL,
    max_steps: int = ODE_MAX_STEPS,
    groups: Optional[Sequence[Sequence[int]]] = None,
    first_step: Optional[float] = None,
    initial_log_scale: Optional[np.ndarray] = None,
) -> OdeResult:
    """
    Integrate y' = rhs(x, y) from x0 to x1 for every column of y0.

    rhs must be linear and homogeneous in y for the renormalisation to be exact.

    Args:
        rhs: Right-hand side, maps (x, y) with y of shape (rows, columns) to the same shape
        x0: Start point
        x1: End point (x1 > x0)
        y0: Initial state, shape (rows, columns)
        rtol: Relative tolerance
        atol: Absolute tolerance
        max_steps: Accepted plus rejected steps allowed before giving up
        groups: Row groups whose common magnitude sets the error scale; each row on its own by default
        first_step: Initial step, defaults to 1e-3 of the interval
        initial_log_scale: Log of a scale already divided out of y0, per column

    Returns:
        OdeResult with the final state and accumulated log scale per column
    """
    y = np.array(y0, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    rows, columns = y.shape
    groups = groups or [[row] for row in range(rows)]
    log_scale = np.zeros(columns) if initial_log_scale is None else np.array(initial_log_scale, dtype=float)
    threshold = np.exp(RENORMALIZATION_EXPONENT)
    span = x1 - x0

    x = x0
    h = first_step or 1e-3 * span
    min_step = 1e-14 * max(abs(span), abs(x0), 1.0)
    previous_error = 1.0
    steps = rejected = 0

    k = [None] * 7
    k[0] = rhs(x, y)

    while x < x1:
        if steps + rejected >= max_steps:
            raise ToleranceUnmet(
                f"radial integration stopped at x={x:.6g} after {max_steps} steps",
                diagnostics={"x": x, "x1": x1, "step": h, "columns": columns},
            )
        if h < min_step:
            raise StiffnessFailure(
                f"step size underflow at x={x:.6g}",
                diagnostics={"x": x, "step": h, "columns": columns},
            )
        last = h >= x1 - x
        h = min(h, x1 - x)

        for stage in range(1, 7):
            increment = sum(coefficient * k[j] for j, coefficient in enumerate(A[stage]) if coefficient != 0.0)
            k[stage] = rhs(x + C[stage] * h, y + h * increment)
        y_new = y + h * sum(B[j] * k[j] for j in range(6) if B[j] != 0.0)
        err = h * sum(E[j] * k[j] for j in range(7) if E[j] != 0.0)

        error = _error_norm(err, y, y_new, rtol, atol, groups)
        if not np.isfinite(error):
            rejected += 1
            h *= MIN_FACTOR
            continue

        if error <= 1.0:
            steps += 1
            x = x1 if last else x + h
            y = y_new
            k[0] = k[6]

            # Rescale columns that left the floating-point comfort zone
            peak = np.max(np.abs(y), axis=0)
            large = peak > threshold
            if np.any(large):
                y[:, large] /= threshold
                k[0][:, large] /= threshold
                log_scale[large] += RENORMALIZATION_EXPONENT

            factor = SAFETY * max(error, 1e-10) ** -ALPHA * previous_error ** BETA
            h *= min(MAX_FACTOR, max(MIN_FACTOR, factor))
            previous_error = max(error, 1e-4)
        else:
            rejected += 1
            factor = SAFETY * error ** -ALPHA
            h *= min(1.0, max(MIN_FACTOR, factor))

    logger.debug(
        "dormand_prince [%g, %g]: %d columns, %d steps, %d rejected",
        x0, x1, columns, steps, rejected,
    )
    return OdeResult(y=y, log_scale=log_scale, steps=steps, rejected=rejected)
