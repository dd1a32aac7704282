import logging
import math
import sys
import time
from concurrent import futures
from typing import Any, Callable, Dict, List, Tuple

from pydantic import ValidationError
from tqdm import tqdm

from revzeta.cli.config_file import build_bump, build_profile
from revzeta.cli.models import BumpKind, Command, ProfileKind, RunConfig, SweepRow
from revzeta.core import cylinder
from revzeta.core.errors import ConfigError, NumericalError, PositivityViolation, RevzetaError, ToleranceUnmet
from revzeta.core.profile import ProfileSpec, bump_edge_residual, validate_profile
from revzeta.core.speczeta import casimir_energy, delta_energy, delta_energy_cylinder, functional_determinant
from revzeta.utils.file_utils import emit_csv, write_gnuplot_script, write_summary

logger = logging.getLogger(__name__)

# Largest |pipeline - direct| accepted by oracle-compare
ZETA_ORACLE_TOLERANCE = 1e-6
# Largest relative difference between ΔE and its finite-difference estimate
ENERGY_ORACLE_RTOL = 1e-3

Handler = Callable[[RunConfig, bool], Dict[str, Any]]


def _checked_profile(run: RunConfig) -> ProfileSpec:
    """Build the configured profile and refuse it when validation fails."""
    p = build_profile(run)
    report = validate_profile(p)
    if not report.positive:
        raise PositivityViolation(
            f"profile {p.label} is not positive on [{run.a:g}, {run.b:g}]",
            diagnostics=report.model_dump(),
        )
    if not report.derivatives_consistent:
        raise ConfigError(
            f"supplied derivatives of {p.label} are inconsistent: {'; '.join(report.failures)}",
            diagnostics=report.model_dump(),
        )
    return p


def handle_validate(run: RunConfig, progress: bool) -> Dict[str, Any]:
    """
    Check positivity and derivative consistency of the profile, and the bump edges.
    """
    p = build_profile(run)
    report = validate_profile(p)
    summary: Dict[str, Any] = {"profile": report.model_dump()}
    if run.bump is not None:
        summary["bumps"] = {
            f"{c:.17g}": bump_edge_residual(build_bump(run.bump, c)) for c in run.bump.centers
        }
    write_summary(run.output_path, summary)
    if not report.positive:
        raise PositivityViolation(f"profile {p.label} is not positive", diagnostics=report.model_dump())
    if not report.ok:
        raise ConfigError(f"profile {p.label} failed validation: {'; '.join(report.failures)}",
                          diagnostics=report.model_dump())
    print(f"profile {p.label} on [{run.a:g}, {run.b:g}]: ok ({report.grid_points} grid points)")
    return summary


def handle_determinant(run: RunConfig, progress: bool) -> Dict[str, Any]:
    """
    Compute ζ'(0) and the functional determinant.
    """
    p = _checked_profile(run)
    result = functional_determinant(p, K=run.K, spec=run.quadrature_spec)
    summary = {"profile": p.label, "result": result.model_dump(mode="json")}
    write_summary(run.output_path, summary)
    print(f"zeta'(0) = {result.zeta_prime:.15g}  log det = {result.log_det:.15g}  det = {result.det:.15g}")
    return summary


def handle_energy(run: RunConfig, progress: bool) -> Dict[str, Any]:
    """
    Compute the Casimir energy and the residue at s = -1/2.
    """
    p = _checked_profile(run)
    result = casimir_energy(p, K=run.K, spec=run.quadrature_spec)
    summary = {"profile": p.label, "result": result.model_dump(mode="json")}
    write_summary(run.output_path, summary)
    print(f"E = {result.energy:.15g}  Res = {result.residue:.6g}")
    return summary


def sweep_point(run: RunConfig, c: float) -> Tuple[SweepRow, Dict[str, float]]:
    """
    ΔE for the bump centred at c.

    Constant profiles use the closed-form ratios; other profiles go through
    the radial solutions.

    Args:
        run: Run configuration
        c: Bump centre

    Returns:
        Sweep row and the per-term breakdown
    """
    bump = build_bump(run.bump, c)
    spec = run.quadrature_spec
    if run.profile.kind == ProfileKind.CONSTANT:
        result = delta_energy_cylinder(run.profile.alpha, run.a, run.b, bump, K=run.K, spec=spec)
    else:
        result = delta_energy(build_profile(run), bump, K=run.K, spec=spec)
    err = result.tail_bound + sum(abs(e) for e in result.quadrature_errors.values())
    row = SweepRow(c=c, delta_E=result.delta_E, err_estimate=err, K_used=result.K_used)
    return row, result.term_breakdown


def _run_sweep(run: RunConfig, progress: bool) -> List[Tuple[SweepRow, Dict[str, float]]]:
    centers = run.bump.centers
    results: List[Any] = [None] * len(centers)
    bar = tqdm(total=len(centers), desc="delta-sweep", file=sys.stderr,
               disable=not progress or not sys.stderr.isatty())
    if run.jobs == 1:
        for index, c in enumerate(centers):
            results[index] = sweep_point(run, c)
            bar.update(1)
    else:
        with futures.ProcessPoolExecutor(max_workers=run.jobs) as executor:
            pending = {executor.submit(sweep_point, run, c): index for index, c in enumerate(centers)}
            for future in futures.as_completed(pending):
                results[pending[future]] = future.result()
                bar.update(1)
    bar.close()
    return results


def mirror_difference(rows: List[SweepRow], a: float, b: float, antisymmetric: bool) -> float:
    """
    Largest |ΔE(c) ∓ ΔE(a + b - c)| over mirrored pairs of the grid.

    Args:
        rows: Sweep rows
        a: Left end
        b: Right end
        antisymmetric: Compare ΔE(c) with -ΔE(a + b - c)

    Returns:
        The largest difference, or nan when the grid has no mirrored pairs
    """
    sign = -1.0 if antisymmetric else 1.0
    tolerance = 1e-12 * (b - a)
    worst = math.nan
    for row in rows:
        for other in rows:
            if abs(row.c + other.c - (a + b)) <= tolerance:
                difference = abs(row.delta_E - sign * other.delta_E)
                worst = difference if math.isnan(worst) else max(worst, difference)
    return worst


def handle_delta_sweep(run: RunConfig, progress: bool) -> Dict[str, Any]:
    """
    Sweep the bump centre over the grid and write ΔE(c) as CSV.
    """
    if run.profile.kind != ProfileKind.CONSTANT:
        _checked_profile(run)
    start = time.time()
    results = _run_sweep(run, progress)
    rows = [row for row, _ in results]
    for row, breakdown in results:
        logger.info("c = %.17g: ΔE = %.15g (K=%d, err %.3e)", row.c, row.delta_E, row.K_used, row.err_estimate)
        for name, value in breakdown.items():
            logger.info("  %s = %.15g", name, value)
    emit_csv(rows, run.output_path)

    summary: Dict[str, Any] = {
        "rows": len(rows),
        "breakdowns": {f"{row.c:.17g}": breakdown for row, breakdown in results},
        "elapsed_seconds": time.time() - start,
    }
    if run.profile.kind == ProfileKind.CONSTANT:
        antisymmetric = run.bump.kind == BumpKind.MIXED
        summary["mirror_difference"] = mirror_difference(rows, run.a, run.b, antisymmetric)
        logger.info("largest mirrored-pair difference: %.3e", summary["mirror_difference"])
    if run.gnuplot:
        summary["gnuplot"] = write_gnuplot_script(run.output_path, f"{run.bump.kind.value} bump, delta={run.bump.delta:g}")
    write_summary(run.output_path, summary)
    print(f"wrote {len(rows)} rows to {run.output_path}")
    return summary


def handle_oracle_compare(run: RunConfig, progress: bool) -> Dict[str, Any]:
    """
    Compare the radial pipeline with the cylinder oracles.

    ζ(s) at integer s from the pipeline is compared with the eigenvalue double
    sum; when a bump is configured, ΔE is also compared with central
    differences of the energy.
    """
    cfg = cylinder.CylinderConfig(alpha=run.profile.alpha, a=run.a, b=run.b)
    summary: Dict[str, Any] = {"zeta": {}, "delta_E": {}}
    failures = []
    for s in run.s_values:
        direct = cylinder.eigenvalue_zeta_direct(cfg, s)
        pipeline = cylinder.zeta_pipeline_at_integer_s(cfg, s)
        difference = abs(pipeline.value - direct.value)
        summary["zeta"][str(s)] = {
            "pipeline": pipeline.value,
            "direct": direct.value,
            "difference": difference,
            "direct_tail_bound": direct.tail_bound,
            "pipeline_tail": pipeline.tail,
        }
        print(f"s = {s}: pipeline {pipeline.value:.15g}  direct {direct.value:.15g}  |diff| {difference:.3e}")
        if difference > ZETA_ORACLE_TOLERANCE:
            failures.append(f"zeta({s}) differs by {difference:.3e}")

    if run.bump is not None:
        for c in run.bump.centers:
            bump = build_bump(run.bump, c)
            analytic = delta_energy_cylinder(cfg.alpha, cfg.a, cfg.b, bump, K=run.K, spec=run.quadrature_spec)
            fd = cylinder.finite_difference_energy_derivative(cfg, bump, run.epsilon_grid, spec=run.quadrature_spec)
            relative = abs(analytic.delta_E - fd["value"]) / max(abs(fd["value"]), 1e-300)
            summary["delta_E"][f"{c:.17g}"] = {
                "analytic": analytic.delta_E,
                "finite_difference": fd["value"],
                "observed_order": fd["order"],
                "relative_difference": relative,
            }
            print(f"c = {c:g}: dE {analytic.delta_E:.12g}  finite difference {fd['value']:.12g}  rel {relative:.3e}")
            if relative > ENERGY_ORACLE_RTOL:
                failures.append(f"dE at c={c:g} differs by {relative:.3e} (relative)")

    write_summary(run.output_path, summary)
    if failures:
        raise ToleranceUnmet("oracle comparison failed: " + "; ".join(failures), diagnostics=summary)
    return summary


HANDLERS: Dict[Command, Handler] = {
    Command.VALIDATE: handle_validate,
    Command.DETERMINANT: handle_determinant,
    Command.ENERGY: handle_energy,
    Command.DELTA_SWEEP: handle_delta_sweep,
    Command.ORACLE_COMPARE: handle_oracle_compare,
}


def run(config: RunConfig, progress: bool = True) -> int:
    """
    Execute one command.

    Args:
        config: Validated run configuration
        progress: Show a progress bar for sweeps

    Returns:
        Exit status: 0 on success, otherwise the exit code of the error
    """
    logger.info("running %s", config.command.value)
    try:
        HANDLERS[config.command](config, progress)
    except ValidationError as exc:
        error = NumericalError(f"{config.command.value} produced an inconsistent result: {exc}")
        logger.error("%s", error)
        return error.exit_code
    except RevzetaError as exc:
        logger.error("%s", exc)
        if exc.diagnostics:
            logger.info("diagnostics: %s", exc.diagnostics)
        return exc.exit_code
    return 0
