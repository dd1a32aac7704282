"""
Closed forms for the cylinder f ≡ α and the oracles built on them.

For f ≡ α the radial equation has constant coefficients, so X_k, the
perturbation ratios X̂_k/X_k and the eigenvalues are all explicit. The ratios
contain products cosh(A)·csch(B) with A ≤ B that reach arguments in the
hundreds; they are evaluated as exp(A - B)(1 + e^{-2A})/(1 - e^{-2B}).
"""
import logging
import math
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.special import beta as beta_function
from scipy.special import betainc
from scipy.special import zeta as hurwitz_zeta

from revzeta.core.profile import BumpSpec, ProfileSpec, constant_profile, perturbed_profile
from revzeta.core.radial import taylor_coefficients
from revzeta.numerics.quadrature import QuadratureSpec, adaptive_quad
from revzeta.numerics.series import central_difference

logger = logging.getLogger(__name__)

# Largest κL for which the variation-of-parameters route is evaluated without rescaling
VOP_EXPONENT_LIMIT = 700.0
# Modes summed by the integer-s pipeline and by the finite-difference energy oracle
PIPELINE_MODES = 128
FD_MODES = 64

RATIO_SPEC = QuadratureSpec(abs_tol=1e-13, rel_tol=1e-12)


class CylinderConfig(BaseModel):
    """Cylinder of radius alpha over [a, b]."""

    model_config = ConfigDict(frozen=True)

    alpha: float = Field(gt=0)
    a: float = 0.0
    b: float = 1.0

    @model_validator(mode="after")
    def _check_interval(self) -> "CylinderConfig":
        if not self.b > self.a:
            raise ValueError(f"interval must satisfy a < b, got [{self.a}, {self.b}]")
        return self

    @property
    def length(self) -> float:
        return self.b - self.a

    def profile(self) -> ProfileSpec:
        return constant_profile(self.alpha, self.a, self.b)


def _log_sinh(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    return y + np.log(-np.expm1(-2.0 * y)) - math.log(2.0)


def _rate(cfg: CylinderConfig, k: float, u: np.ndarray) -> np.ndarray:
    """κ = k√(1 + u²α²)/α, the exponential rate of mode k at λ = uk."""
    return k * np.sqrt(1.0 + (np.asarray(u, dtype=float) * cfg.alpha) ** 2) / cfg.alpha


def closed_X0(cfg: CylinderConfig, lam):
    """
    X_0(b; iλ) = sinh(Lλ)/λ, with the limit L at λ = 0.

    Args:
        cfg: Cylinder
        lam: λ ≥ 0 (scalar or array)

    Returns:
        X_0(b; iλ) with the shape of lam
    """
    lam = np.asarray(lam, dtype=float)
    L = cfg.length
    safe = np.where(lam == 0.0, 1.0, lam)
    value = np.where(lam == 0.0, L, np.sinh(L * safe) / safe)
    return float(value) if value.ndim == 0 else value


def closed_Xk(cfg: CylinderConfig, k: float, u):
    """
    X_k(b; iuk) = α sinh(kL√(1+u²α²)/α) / (k√(1+u²α²)).

    Args:
        cfg: Cylinder
        k: Mode number (> 0)
        u: λ/k (scalar or array)

    Returns:
        X_k(b; iuk) with the shape of u
    """
    u = np.asarray(u, dtype=float)
    rho = np.sqrt(1.0 + (u * cfg.alpha) ** 2)
    value = cfg.alpha * np.sinh(_rate(cfg, k, u) * cfg.length) / (k * rho)
    return float(value) if value.ndim == 0 else value


def closed_log_X0(cfg: CylinderConfig, lam) -> np.ndarray:
    """log X_0(b; iλ) without overflow."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    safe = np.where(lam == 0.0, 1.0, lam)
    return np.where(lam == 0.0, math.log(cfg.length), _log_sinh(cfg.length * safe) - np.log(safe))


def closed_log_Xk(cfg: CylinderConfig, k: float, u) -> np.ndarray:
    """log X_k(b; iuk) without overflow."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    rho = np.sqrt(1.0 + (u * cfg.alpha) ** 2)
    return math.log(cfg.alpha) + _log_sinh(_rate(cfg, k, u) * cfg.length) - np.log(k * rho)


def _support(cfg: CylinderConfig, bump: BumpSpec) -> Tuple[float, float]:
    lo, hi = max(bump.support[0], cfg.a), min(bump.support[1], cfg.b)
    return lo, hi


def _cosh_csch(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """cosh(A)/sinh(B) for 0 ≤ A ≤ B, B > 0."""
    return np.exp(A - B) * (1.0 + np.exp(-2.0 * A)) / (-np.expm1(-2.0 * B))


def _bump_integral(
    cfg: CylinderConfig,
    bump: BumpSpec,
    kernel,
    columns: int,
    spec: QuadratureSpec,
) -> np.ndarray:
    """∫ g(t) kernel(t) dt over the bump support for a (n_t, columns) kernel."""
    lo, hi = _support(cfg, bump)
    if bump.amplitude == 0.0 or not hi > lo:
        return np.zeros(columns)
    g = bump.g

    def integrand(t: np.ndarray) -> np.ndarray:
        return g(t)[:, None] * kernel(t)

    value, _ = adaptive_quad(integrand, lo, hi, spec, min_panels=4)
    return np.atleast_1d(value)


def ratio0(cfg: CylinderConfig, bump: BumpSpec, lam, spec: Optional[QuadratureSpec] = None) -> np.ndarray:
    """
    X̂_0(b; iλ)/X_0(b; iλ) = -(λ/α) csch(Lλ) ∫ cosh(λ(a+b-2t)) g(t) dt.

    Args:
        cfg: Cylinder
        bump: Perturbation g
        lam: λ ≥ 0 (array)
        spec: Quadrature tolerances of the t-integral

    Returns:
        Array of ratios, one per λ
    """
    spec = spec or RATIO_SPEC
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    L, mid2 = cfg.length, cfg.a + cfg.b
    B = L * lam
    # λ/(1 - e^{-2Lλ}) with its limit 1/(2L) at λ = 0
    prefactor = np.divide(lam, -np.expm1(-2.0 * B), out=np.full_like(lam, 0.5 / L), where=B > 0)

    def kernel(t: np.ndarray) -> np.ndarray:
        A = np.abs(mid2 - 2.0 * t)[:, None] * lam[None, :]
        return np.exp(A - B[None, :]) * (1.0 + np.exp(-2.0 * A))

    return -prefactor / cfg.alpha * _bump_integral(cfg, bump, kernel, lam.size, spec)


def _ratiok_parts(
    cfg: CylinderConfig,
    bump: BumpSpec,
    k: float,
    u: np.ndarray,
    spec: QuadratureSpec,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Prefactor k/(α²ρ), κL, and the u²α² cosh·csch integral of ratiok."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    alpha, mid2 = cfg.alpha, cfg.a + cfg.b
    rho = np.sqrt(1.0 + (u * alpha) ** 2)
    kappa = _rate(cfg, k, u)
    B = kappa * cfg.length

    def kernel(t: np.ndarray) -> np.ndarray:
        A = np.abs(mid2 - 2.0 * t)[:, None] * kappa[None, :]
        return (u * alpha)[None, :] ** 2 * _cosh_csch(A, B[None, :])

    second = _bump_integral(cfg, bump, kernel, u.size, spec)
    return k / (alpha ** 2 * rho), B, second


def ratiok(cfg: CylinderConfig, bump: BumpSpec, k: float, u, spec: Optional[QuadratureSpec] = None) -> np.ndarray:
    """
    X̂_k/X_k = -(k csch(κL)/(α²ρ)) ∫ (cosh(κL) + u²α² cosh(κ(a+b-2t))) g(t) dt.

    ρ = √(1+u²α²) and κ = kρ/α.

    Args:
        cfg: Cylinder
        bump: Perturbation g
        k: Mode number (> 0, may be non-integer)
        u: λ/k (array)
        spec: Quadrature tolerances of the t-integral

    Returns:
        Array of ratios, one per u
    """
    spec = spec or RATIO_SPEC
    prefactor, B, second = _ratiok_parts(cfg, bump, k, u, spec)
    total = _total(cfg, bump, spec)
    coth = (1.0 + np.exp(-2.0 * B)) / (-np.expm1(-2.0 * B))
    return -prefactor * (coth * total + second)


def subtracted_ratiok(
    cfg: CylinderConfig,
    bump: BumpSpec,
    k: float,
    u,
    spec: Optional[QuadratureSpec] = None,
) -> np.ndarray:
    """ratiok + k∫g/(α²ρ), computed without cancellation; decays like exp(-2κ·distance to the ends)."""
    spec = spec or RATIO_SPEC
    prefactor, B, second = _ratiok_parts(cfg, bump, k, u, spec)
    total = _total(cfg, bump, spec)
    coth_minus_one = 2.0 / np.expm1(2.0 * B)
    return -prefactor * (coth_minus_one * total + second)


def _total(cfg: CylinderConfig, bump: BumpSpec, spec: QuadratureSpec) -> float:
    lo, hi = _support(cfg, bump)
    if bump.amplitude == 0.0 or not hi > lo:
        return 0.0
    value, _ = adaptive_quad(bump.g, lo, hi, spec, min_panels=4)
    return float(value)


class VariationReport(BaseModel):
    """Perturbation ratio recomputed from a fundamental pair and its Wronskian."""

    k: float
    t: float
    wronskian: float
    expected_wronskian: float
    ratio_variation: float
    ratio_closed: float

    @property
    def difference(self) -> float:
        return abs(self.ratio_variation - self.ratio_closed)


def variation_of_parameters_check(
    cfg: CylinderConfig,
    bump: BumpSpec,
    k: float,
    t: float,
    spec: Optional[QuadratureSpec] = None,
) -> VariationReport:
    """
    Recompute X̂_k(b)/X_k(b) by variation of parameters and compare with the closed ratio.

    With X¹ = e^{κ(x-a)}, X² = e^{-κ(x-a)} (Wronskian -2κ) and the source
    G = (g'/α) X' + (2k²g/α³) X, the solution with zero data is
    X̂(b) = (2/W) ∫ G(t) sinh(κ(b - t)) dt. The g' term is kept as it is, so
    this route is independent of the parts-integrated closed ratio. The kernel is
    divided by X(b) before integration, so it stays bounded for any κ.

    Args:
        cfg: Cylinder
        bump: Perturbation g
        k: Mode number (0 for the k = 0 sector)
        t: λ when k = 0, u = λ/k otherwise
        spec: Quadrature tolerances

    Returns:
        VariationReport
    """
    spec = spec or RATIO_SPEC
    alpha, a, b = cfg.alpha, cfg.a, cfg.b
    kappa = t if k == 0 else float(_rate(cfg, k, t))
    if not kappa > 0:
        raise ValueError("the direct route needs λ > 0 in the k = 0 sector")
    if kappa * cfg.length > VOP_EXPONENT_LIMIT:
        raise ValueError(f"κL = {kappa * cfg.length:.4g} is outside the range of the direct route")

    offset = 0.5 * cfg.length
    X1, X1p = math.exp(kappa * offset), kappa * math.exp(kappa * offset)
    X2, X2p = math.exp(-kappa * offset), -kappa * math.exp(-kappa * offset)
    wronskian = X1 * X2p - X1p * X2

    g, gp = bump.g, bump.g_prime
    denominator = -2.0 * math.expm1(-2.0 * kappa * cfg.length)

    def integrand(s: np.ndarray) -> np.ndarray:
        # X(s) sinh(κ(b - s)) / X(b) and X'(s) sinh(κ(b - s)) / X(b) in decaying exponentials
        left, right = -np.expm1(-2.0 * kappa * (s - a)), -np.expm1(-2.0 * kappa * (b - s))
        sinh_kernel = left * right / denominator
        cosh_kernel = kappa * (2.0 - left) * right / denominator
        return gp(s) * cosh_kernel / alpha + 2.0 * k ** 2 * g(s) * sinh_kernel / alpha ** 3

    lo, hi = _support(cfg, bump)
    integral = 0.0
    if bump.amplitude != 0.0 and hi > lo:
        integral, _ = adaptive_quad(integrand, lo, hi, spec, min_panels=4)

    if k == 0:
        closed = float(ratio0(cfg, bump, np.array([t]), spec)[0])
    else:
        closed = float(ratiok(cfg, bump, k, np.array([t]), spec)[0])
    return VariationReport(
        k=float(k),
        t=float(t),
        wronskian=wronskian,
        expected_wronskian=-2.0 * kappa,
        ratio_variation=2.0 * float(integral) / wronskian,
        ratio_closed=closed,
    )


def eigenvalues(cfg: CylinderConfig, n: np.ndarray, k: np.ndarray) -> np.ndarray:
    """λ²_{n,k} = (nπ/L)² + (k/α)² for Dirichlet ends, broadcast over n and k."""
    n = np.asarray(n, dtype=float)
    k = np.asarray(k, dtype=float)
    return (n * math.pi / cfg.length) ** 2 + (k / cfg.alpha) ** 2


class DirectZeta(BaseModel):
    """Eigenvalue double sum with its tail treatment."""

    value: float
    tail_bound: float = Field(ge=0)
    n_max: int
    k_max: int


def _quadratic_tail(A: np.ndarray, alpha: float, s: float, start: float) -> np.ndarray:
    """∫_start^∞ (A + κ²/α²)^{-s} dκ through the incomplete beta function."""
    c = A / (A + (start / alpha) ** 2)
    return alpha * A ** (0.5 - s) * 0.5 * beta_function(s - 0.5, 0.5) * betainc(s - 0.5, 0.5, c)


def eigenvalue_zeta_direct(
    cfg: CylinderConfig,
    s: float,
    cutoffs: Optional[Tuple[int, int]] = None,
) -> DirectZeta:
    """
    ζ(s) = Σ_{n≥1} Σ_{k∈Z} λ_{n,k}^{-2s} of the cylinder for s ≥ 2.

    The box n ≤ N, |k| ≤ K is summed directly. For each n the modes |k| > K
    are replaced by the integral from K + 1/2 (midpoint rule; for the convex
    summand h the error is a small multiple of |h'(K + 1/2)|); rows n > N are replaced by
    their Poisson-summed k-sums α B(s-1/2, 1/2)(nπ/L)^{1-2s}, summed with the
    Hurwitz zeta function, whose exponentially small corrections are bounded.

    Args:
        cfg: Cylinder
        s: Exponent, s ≥ 2
        cutoffs: (N, K); chosen from the geometry when omitted

    Returns:
        DirectZeta with the value and an error bound
    """
    if s < 2:
        raise ValueError(f"the direct sum is only used for s >= 2, got {s}")
    L, alpha = cfg.length, cfg.alpha
    if cutoffs is None:
        n_max = max(200, int(math.ceil(10.0 * L / alpha)))
        k_max = max(400, int(math.ceil(2.0 * alpha * n_max * math.pi / L)))
    else:
        n_max, k_max = cutoffs

    n = np.arange(1, n_max + 1)
    k = np.arange(-k_max, k_max + 1)
    box = float(np.sum(np.sum(eigenvalues(cfg, n[:, None], k[None, :]) ** (-s), axis=1)))

    A = (n * math.pi / L) ** 2
    start = k_max + 0.5
    k_tail = 2.0 * _quadratic_tail(A, alpha, s, start)
    slope = 2.0 * s * start / alpha ** 2 * (A + (start / alpha) ** 2) ** (-s - 1.0)
    midpoint_bound = float(np.sum(slope)) / 6.0

    row_constant = alpha * beta_function(s - 0.5, 0.5) * (math.pi / L) ** (1.0 - 2.0 * s)
    n_tail = row_constant * float(hurwitz_zeta(2.0 * s - 1.0, n_max + 1))
    decay = 2.0 * math.pi ** 2 * alpha / L
    poisson_bound = (
        4.0 * row_constant * (n_max + 1.0) ** (1.0 - 2.0 * s)
        * (1.0 + decay * (n_max + 1.0)) ** s * math.exp(-decay * (n_max + 1.0))
        / -math.expm1(-decay)
    )

    value = box + float(np.sum(k_tail)) + n_tail
    logger.debug(
        "direct zeta s=%g: box %.15g, k-tail %.3e, n-tail %.3e",
        s, box, float(np.sum(k_tail)), n_tail,
    )
    return DirectZeta(value=value, tail_bound=midpoint_bound + poisson_bound, n_max=n_max, k_max=k_max)


class PipelineZeta(BaseModel):
    """ζ(s) at an integer s from the radial solutions, with its mode-tail estimate."""

    value: float
    K_used: int
    tail: float
    terms: Dict[int, float] = Field(default_factory=dict)


def zeta_pipeline_at_integer_s(
    cfg: CylinderConfig,
    s: int,
    K: int = PIPELINE_MODES,
    rtol: float = 1e-12,
) -> PipelineZeta:
    """
    ζ(s) for integer s ≥ 2 from the contour representation in its limit form.

    At integer s the factor sin(πs)/π vanishes and the imaginary-axis integral
    reduces to the residue at λ = 0: ζ_k(s) = -s [z^s] log X_k(b; √z), with
    z = λ². The coefficients come from the z-derivative hierarchy of the radial
    equation. ζ = ζ_0 + 2 Σ_{k≥1} ζ_k; the modes past K are summed from a fit
    t_k ≈ c₁ k^{1-2s} + c₂ k^{-2s} with the Hurwitz zeta function.

    Args:
        cfg: Cylinder
        s: Integer exponent, s ≥ 2
        K: Highest mode summed explicitly
        rtol: Integrator relative tolerance

    Returns:
        PipelineZeta
    """
    if s < 2 or int(s) != s:
        raise ValueError(f"the pipeline evaluates integer s >= 2, got {s}")
    s = int(s)
    ks = np.arange(0, K + 1)
    coefficients = taylor_coefficients(cfg.profile(), ks, s, rtol=rtol)
    zeta_k = -s * coefficients[:, s]

    partial = float(zeta_k[0])
    for value in zeta_k[1:]:
        partial += 2.0 * float(value)

    p1, p2 = 2.0 * s - 1.0, 2.0 * s
    k1, k2 = K // 2, K
    system = np.array([[k1 ** -p1, k1 ** -p2], [k2 ** -p1, k2 ** -p2]])
    c1, c2 = np.linalg.solve(system, np.array([zeta_k[k1], zeta_k[k2]]))
    tail = 2.0 * (c1 * float(hurwitz_zeta(p1, K + 1)) + c2 * float(hurwitz_zeta(p2, K + 1)))
    logger.info("pipeline zeta s=%d: partial %.15g, tail %.3e", s, partial, tail)
    return PipelineZeta(
        value=partial + tail,
        K_used=K,
        tail=abs(tail),
        terms={int(k): float(v) for k, v in zip(ks[:9], zeta_k[:9])},
    )


def finite_difference_energy_derivative(
    cfg: CylinderConfig,
    bump: BumpSpec,
    epsilons: Sequence[float] = (1e-2, 5e-3, 2.5e-3),
    K: int = FD_MODES,
    spec: Optional[QuadratureSpec] = None,
) -> Dict[str, object]:
    """
    Central differences of the Casimir energy of f + εg, Richardson-extrapolated in ε.

    The mode series of both energies is cut at the same K, so the truncation
    error cancels in the difference to the order that matters.

    Args:
        cfg: Cylinder
        bump: Perturbation g
        epsilons: Decreasing steps with a constant ratio
        K: Modes summed explicitly
        spec: Quadrature tolerances

    Returns:
        Dictionary with the extrapolated derivative, observed order and raw differences
    """
    from revzeta.core.speczeta import casimir_energy

    if bump.amplitude == 0.0:
        return {"value": 0.0, "order": math.nan, "raw": [0.0] * len(epsilons)}
    base = cfg.profile()

    def energy(epsilon: float) -> float:
        result = casimir_energy(perturbed_profile(base, bump, epsilon), K=K, spec=spec)
        logger.info("energy at ε=%g: %.15g", epsilon, result.energy)
        return result.energy

    return central_difference(energy, 0.0, list(epsilons))
