"""
Flat `key = value` run configurations.

A configuration file holds one assignment per line; `#` starts a comment.
Overrides given on the command line as `--set key=value` are applied after
the file. Dotted keys address the nested sections of RunConfig, e.g.
`profile.f = 1 + x/4`, `bump.c_grid = 0.3:0.7:33`, `tol.abs = 1e-7`.
"""
import logging
import re
from pathlib import Path
from tokenize import TokenError
from typing import Dict, List, Optional, Sequence

import numpy as np
import sympy as sp
from pydantic import ValidationError
from sympy.core.function import AppliedUndef
from sympy.parsing.sympy_parser import convert_xor, parse_expr, standard_transformations

from revzeta.cli.models import BumpConfig, ProfileKind, RunConfig
from revzeta.core.errors import ConfigError
from revzeta.core.profile import (
    X,
    BumpSpec,
    ProfileSpec,
    constant_profile,
    expression_profile,
    make_bump,
)

logger = logging.getLogger(__name__)

# Aliases accepted for the dotted keys of RunConfig
KEY_ALIASES = {
    "interval.a": "a",
    "interval.b": "b",
    "tol.abs": "tolerances.abs_tol",
    "tol.rel": "tolerances.rel_tol",
    "tol.max_subdivisions": "tolerances.max_subdivisions",
    "out": "output_path",
}
LIST_KEYS = {"bump.c_grid", "epsilon_grid", "s_values"}

# Names an expression profile may use
EXPRESSION_NAMESPACE = {
    "x": X,
    "pi": sp.pi,
    "E": sp.E,
    "sin": sp.sin,
    "cos": sp.cos,
    "tan": sp.tan,
    "sinh": sp.sinh,
    "cosh": sp.cosh,
    "tanh": sp.tanh,
    "exp": sp.exp,
    "log": sp.log,
    "sqrt": sp.sqrt,
}
# parse_expr emits these constructors for literals and unknown names
_PARSER_GLOBALS = {
    "Integer": sp.Integer,
    "Float": sp.Float,
    "Rational": sp.Rational,
    "Symbol": sp.Symbol,
}
_EXPRESSION_CHARS = re.compile(r"^[0-9A-Za-z_+\-*/^().\s]*$")
# A dot followed by a name, except the exponent of a literal such as 1.e-3
_ATTRIBUTE_ACCESS = re.compile(r"(?:(?<![0-9])\.|\.(?![eE][+\-]?[0-9]))\s*[A-Za-z_]")
_TRANSFORMATIONS = standard_transformations + (convert_xor,)


def parse_config_text(text: str, source: str = "<string>") -> Dict[str, str]:
    """
    Parse flat `key = value` lines.

    Args:
        text: Configuration text
        source: Name used in error messages

    Returns:
        Dictionary of raw string values in file order
    """
    entries: Dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(
                f"{source}:{number}: expected 'key = value', got '{raw.strip()}'",
                diagnostics={"line": number},
            )
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{number}: empty key", diagnostics={"line": number})
        entries[key] = value
    return entries


def read_config_file(path: str) -> Dict[str, str]:
    """
    Read a configuration file.

    Args:
        path: Path to the file

    Returns:
        Dictionary of raw string values
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc}", diagnostics={"path": path}) from exc
    return parse_config_text(text, source=path)


def apply_overrides(entries: Dict[str, str], overrides: Sequence[str]) -> Dict[str, str]:
    """Apply `key=value` overrides on top of file entries."""
    merged = dict(entries)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override '{item}' is not of the form key=value", diagnostics={"override": item})
        key, value = (part.strip() for part in item.split("=", 1))
        merged[key] = value
    return merged


def parse_grid(value: str) -> List[float]:
    """
    Parse a grid given as `start:stop:count` or as a comma-separated list.

    Args:
        value: Grid text

    Returns:
        List of floats
    """
    value = value.strip()
    if not value:
        return []
    try:
        if ":" in value:
            start, stop, count = value.split(":")
            return [float(v) for v in np.linspace(float(start), float(stop), int(count))]
        return [float(v) for v in value.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"malformed grid '{value}'", diagnostics={"grid": value}) from exc


def _nest(entries: Dict[str, str]) -> Dict[str, object]:
    nested: Dict[str, object] = {}
    for key, value in entries.items():
        key = KEY_ALIASES.get(key, key)
        parsed: object = parse_grid(value) if key in LIST_KEYS else value
        parts = key.split(".")
        section = nested
        for part in parts[:-1]:
            child = section.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigError(f"key '{key}' conflicts with a scalar setting", diagnostics={"key": key})
            section = child
        section[parts[-1]] = parsed
    return nested


def build_run_config(
    entries: Dict[str, str],
    command: Optional[str] = None,
    output_path: Optional[str] = None,
    jobs: Optional[int] = None,
) -> RunConfig:
    """
    Validate raw entries into a RunConfig.

    Command-line arguments take precedence over the entries.

    Args:
        entries: Raw `key = value` entries (file plus overrides)
        command: Command named on the command line
        output_path: Output path from --out
        jobs: Worker count from --jobs

    Returns:
        RunConfig
    """
    nested = _nest(entries)
    if command is not None:
        nested["command"] = command
    if output_path is not None:
        nested["output_path"] = output_path
    if jobs is not None:
        nested["jobs"] = jobs
    try:
        return RunConfig.model_validate(nested)
    except ValidationError as exc:
        raise ConfigError(f"invalid run configuration: {exc}", diagnostics={"errors": exc.errors()}) from exc


def parse_profile_expression(text: str) -> sp.Expr:
    """
    Parse an arithmetic expression in x.

    Accepts + - * / ^, parentheses, numbers, pi, E and the functions of
    EXPRESSION_NAMESPACE.

    Args:
        text: Expression text

    Returns:
        sympy expression whose only free symbol is x
    """
    if not _EXPRESSION_CHARS.match(text) or "__" in text or _ATTRIBUTE_ACCESS.search(text):
        raise ConfigError(f"expression '{text}' contains unsupported characters", diagnostics={"expression": text})
    try:
        expr = parse_expr(
            text,
            local_dict=dict(EXPRESSION_NAMESPACE),
            global_dict=dict(_PARSER_GLOBALS),
            transformations=_TRANSFORMATIONS,
        )
    except (SyntaxError, TokenError, TypeError, NameError, AttributeError, sp.SympifyError) as exc:
        raise ConfigError(f"cannot parse expression '{text}': {exc}", diagnostics={"expression": text}) from exc
    if not isinstance(expr, sp.Expr):
        raise ConfigError(f"'{text}' is not an arithmetic expression", diagnostics={"expression": text})
    unknown = sorted(str(s) for s in expr.free_symbols if s != X)
    unknown += sorted(str(fn.func) for fn in expr.atoms(AppliedUndef))
    if unknown:
        raise ConfigError(
            f"expression '{text}' uses unknown names {unknown}",
            diagnostics={"expression": text, "unknown": unknown},
        )
    return expr


def build_profile(run: RunConfig) -> ProfileSpec:
    """Profile described by the configuration."""
    profile = run.profile
    if profile.kind == ProfileKind.CONSTANT:
        return constant_profile(profile.alpha, run.a, run.b)
    f = parse_profile_expression(profile.f)
    f_prime = parse_profile_expression(profile.f_prime) if profile.f_prime else None
    f_double_prime = parse_profile_expression(profile.f_double_prime) if profile.f_double_prime else None
    return expression_profile(f, run.a, run.b, f_prime=f_prime, f_double_prime=f_double_prime, label=profile.f)


def build_bump(bump: BumpConfig, c: float) -> BumpSpec:
    """Bump of the configured shape centred at c."""
    return make_bump(bump.kind.value, c, bump.delta)
