"""
Adaptive Gauss-Kronrod quadrature and the map of half-line integrals onto [0, 1].

Integrands are called with a 1-D array of abscissae and may return either an
array of the same length (scalar integrand) or an array of shape (n, m)
(m integrands sharing the same abscissae). Every panel is evaluated in one
call, so callers that batch expensive work (radial solves) see 15 or 30
nodes at a time.
"""
import logging
from typing import Callable, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from revzeta.config import ABS_TOL, K_CAP, MAX_SUBDIVISIONS, REL_TOL
from revzeta.core.errors import NonDecayDetected, SubdivisionLimit

logger = logging.getLogger(__name__)

ArrayFn = Callable[[np.ndarray], np.ndarray]
Value = Union[float, np.ndarray]

# Kronrod 15-point abscissae on [0, 1] (mirrored), odd entries are the Gauss 7-point nodes
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

# Full 15-node rule on [-1, 1]
NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
GAUSS_WEIGHTS = np.zeros(15)
GAUSS_WEIGHTS[1:7:2] = _WG[:3]
GAUSS_WEIGHTS[7] = _WG[3]
GAUSS_WEIGHTS[9:14:2] = _WG[2::-1]

EPS = np.finfo(float).eps
ROUNDOFF_FACTOR = 50.0


class QuadratureSpec(BaseModel):
    """Tolerances shared by every quadrature and mode series in a run."""

    model_config = ConfigDict(frozen=True)

    abs_tol: float = Field(default=ABS_TOL, gt=0)
    rel_tol: float = Field(default=REL_TOL, gt=0)
    max_subdivisions: int = Field(default=MAX_SUBDIVISIONS, ge=1)
    k_cap: int = Field(default=K_CAP, ge=1)

    def tightened(self, factor: float) -> "QuadratureSpec":
        """Return a copy with both tolerances divided by factor."""
        return QuadratureSpec(
            abs_tol=self.abs_tol / factor,
            rel_tol=self.rel_tol / factor,
            max_subdivisions=self.max_subdivisions,
            k_cap=self.k_cap,
        )


def _panel_nodes(lo: float, hi: float) -> np.ndarray:
    return 0.5 * (hi - lo) * NODES + 0.5 * (hi + lo)


def _apply_rule(values: np.ndarray, lo: float, hi: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Kronrod value, |Kronrod - Gauss| and the Kronrod integral of |f| of one panel from its 15 samples."""
    half = 0.5 * (hi - lo)
    kronrod = half * np.tensordot(KRONROD_WEIGHTS, values, axes=(0, 0))
    gauss = half * np.tensordot(GAUSS_WEIGHTS, values, axes=(0, 0))
    magnitude = abs(half) * np.tensordot(KRONROD_WEIGHTS, np.abs(values), axes=(0, 0))
    return kronrod, np.abs(kronrod - gauss), magnitude


def _evaluate_panels(fn: ArrayFn, panels: List[Tuple[float, float]]) -> List[Tuple[np.ndarray, ...]]:
    """Evaluate several panels with a single integrand call."""
    x = np.concatenate([_panel_nodes(lo, hi) for lo, hi in panels])
    values = np.asarray(fn(x), dtype=float)
    if values.shape[0] != x.shape[0]:
        raise ValueError(f"integrand returned {values.shape[0]} values for {x.shape[0]} nodes")
    if not np.all(np.isfinite(values)):
        raise SubdivisionLimit(
            "integrand returned non-finite values",
            diagnostics={"panels": panels},
        )
    results = []
    for i, (lo, hi) in enumerate(panels):
        results.append(_apply_rule(values[15 * i:15 * (i + 1)], lo, hi))
    return results


def _tolerance(total: np.ndarray, magnitude: np.ndarray, spec: QuadratureSpec) -> np.ndarray:
    """Requested accuracy, never below the rounding level of the summed |f| (QUADPACK floor)."""
    return np.maximum(np.maximum(spec.abs_tol, spec.rel_tol * np.abs(total)), ROUNDOFF_FACTOR * EPS * magnitude)


def adaptive_quad(
    fn: ArrayFn,
    lo: float,
    hi: float,
    spec: Optional[QuadratureSpec] = None,
    min_panels: int = 1,
) -> Tuple[Value, Value]:
    """
    Integrate fn over [lo, hi] by globally adaptive bisection of G7/K15 panels.

    Args:
        fn: Vectorised integrand
        lo: Lower limit
        hi: Upper limit (must exceed lo)
        spec: Tolerances; defaults come from the environment
        min_panels: Number of equal panels to start from

    Returns:
        Tuple of (value, error estimate), scalars or arrays matching the integrand
    """
    spec = spec or QuadratureSpec()
    if not hi > lo:
        raise ValueError(f"adaptive_quad needs lo < hi, got [{lo}, {hi}]")

    edges = np.linspace(lo, hi, min_panels + 1)
    initial = [(float(edges[i]), float(edges[i + 1])) for i in range(min_panels)]

    # Each panel is (left, right, value, error, |f| integral); kept sorted by left edge
    panels = [
        (a, b, val, err, mag)
        for (a, b), (val, err, mag) in zip(initial, _evaluate_panels(fn, initial))
    ]

    while True:
        # Fixed summation order keeps results bit-reproducible
        panels.sort(key=lambda item: item[0])
        total = np.sum([item[2] for item in panels], axis=0)
        error = np.sum([item[3] for item in panels], axis=0)
        magnitude = np.sum([item[4] for item in panels], axis=0)
        tol = _tolerance(total, magnitude, spec)
        if np.all(error <= tol):
            break
        if len(panels) >= spec.max_subdivisions:
            raise SubdivisionLimit(
                f"adaptive quadrature on [{lo}, {hi}] did not converge "
                f"in {spec.max_subdivisions} panels",
                diagnostics={"error": float(np.max(error)), "panels": len(panels)},
                partial=float(np.ravel(total)[0]),
            )

        # Bisect the panel with the worst error relative to the current tolerance
        worst = max(range(len(panels)), key=lambda i: float(np.max(panels[i][3] / tol)))
        a, b = panels.pop(worst)[:2]
        mid = 0.5 * (a + b)
        children = [(a, mid), (mid, b)]
        for (ca, cb), (val, err, mag) in zip(children, _evaluate_panels(fn, children)):
            panels.append((ca, cb, val, err, mag))

    logger.debug("adaptive_quad [%g, %g]: %d panels, error %.3e", lo, hi, len(panels), np.max(error))
    if np.ndim(total) == 0:
        return float(total), float(error)
    return total, error


def improper_quad(
    fn: ArrayFn,
    spec: Optional[QuadratureSpec] = None,
    lo: float = 0.0,
    check_decay: bool = True,
    min_panels: int = 2,
) -> Tuple[Value, Value]:
    """
    Integrate fn over [lo, infinity) through u = lo + t/(1-t).

    The Kronrod nodes never touch t = 1, so the singular end of the map is
    handled by the open rule itself.

    Args:
        fn: Vectorised integrand on [lo, infinity)
        spec: Tolerances
        lo: Lower limit
        check_decay: Sample |fn| at u = 1e3 and 1e4 and refuse growing integrands
        min_panels: Number of equal panels in t to start from

    Returns:
        Tuple of (value, error estimate)
    """
    if check_decay:
        probe = np.abs(np.asarray(fn(lo + np.array([1.0e3, 1.0e4])), dtype=float))
        near, far = np.max(probe[0]), np.max(probe[1])
        if far > near and far > 1e-300:
            raise NonDecayDetected(
                "integrand does not decay beyond u = 1e3",
                diagnostics={"|f(1e3)|": near, "|f(1e4)|": far},
            )

    def mapped(t: np.ndarray) -> np.ndarray:
        one_minus = 1.0 - t
        u = lo + t / one_minus
        values = np.asarray(fn(u), dtype=float)
        jacobian = 1.0 / one_minus ** 2
        if values.ndim > 1:
            return values * jacobian[:, None]
        return values * jacobian

    return adaptive_quad(mapped, 0.0, 1.0, spec, min_panels=min_panels)


def gauss_legendre(fn: ArrayFn, lo: float, hi: float, points: int = 8) -> Value:
    """Fixed-order Gauss-Legendre rule, used where the integrand is known to be smooth."""
    nodes, weights = np.polynomial.legendre.leggauss(points)
    x = 0.5 * (hi - lo) * nodes + 0.5 * (hi + lo)
    values = np.asarray(fn(x), dtype=float)
    return 0.5 * (hi - lo) * np.tensordot(weights, values, axes=(0, 0))

