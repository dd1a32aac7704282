from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from revzeta.config import ABS_TOL, JOBS, K_CAP, MAX_SUBDIVISIONS, OUTPUT_DIR, REL_TOL
from revzeta.core.profile import SUPPORT_SLACK
from revzeta.numerics.quadrature import QuadratureSpec


class Command(str, Enum):
    """Enum for the commands of the command-line tool"""
    VALIDATE = "validate"
    DETERMINANT = "determinant"
    ENERGY = "energy"
    DELTA_SWEEP = "delta-sweep"
    ORACLE_COMPARE = "oracle-compare"


class ProfileKind(str, Enum):
    """Enum for profile sources"""
    CONSTANT = "constant"
    EXPRESSION = "expression"


class BumpKind(str, Enum):
    """Enum for bump shapes"""
    GAUSSIAN = "gaussian"
    MIXED = "mixed"


class ProfileConfig(BaseModel):
    """Profile section of a run configuration"""
    model_config = ConfigDict(extra="forbid")

    kind: ProfileKind = ProfileKind.CONSTANT
    alpha: float = Field(default=1.0, gt=0)
    f: Optional[str] = None
    f_prime: Optional[str] = None
    f_double_prime: Optional[str] = None

    @model_validator(mode="after")
    def _check_sources(self) -> "ProfileConfig":
        if self.kind == ProfileKind.EXPRESSION and not self.f:
            raise ValueError("expression profiles need profile.f")
        if self.f_double_prime and not self.f_prime:
            raise ValueError("profile.f_double_prime given without profile.f_prime")
        return self


class BumpConfig(BaseModel):
    """Bump section of a run configuration"""
    model_config = ConfigDict(extra="forbid")

    kind: BumpKind = BumpKind.GAUSSIAN
    delta: float = Field(gt=0)
    c: Optional[float] = None
    c_grid: List[float] = []

    @property
    def centers(self) -> List[float]:
        """Sweep grid, or the single center when no grid is given."""
        if self.c_grid:
            return list(self.c_grid)
        return [self.c] if self.c is not None else []


class Tolerances(BaseModel):
    """Quadrature and series tolerances of a run"""
    model_config = ConfigDict(extra="forbid")

    abs_tol: float = Field(default=ABS_TOL, gt=0)
    rel_tol: float = Field(default=REL_TOL, gt=0)
    max_subdivisions: int = Field(default=MAX_SUBDIVISIONS, ge=1)

    def quadrature_spec(self, k_cap: int) -> QuadratureSpec:
        return QuadratureSpec(
            abs_tol=self.abs_tol,
            rel_tol=self.rel_tol,
            max_subdivisions=self.max_subdivisions,
            k_cap=k_cap,
        )


class RunConfig(BaseModel):
    """Validated configuration of one command-line run"""
    model_config = ConfigDict(extra="forbid")

    command: Command
    profile: ProfileConfig = ProfileConfig()
    a: float = 0.0
    b: float = 1.0
    bump: Optional[BumpConfig] = None
    epsilon_grid: List[float] = [1e-2, 5e-3, 2.5e-3]
    s_values: List[int] = [2, 3]
    tolerances: Tolerances = Tolerances()
    K: Optional[int] = Field(default=None, ge=1)
    K_cap: int = Field(default=K_CAP, ge=1)
    output_path: str = f"{OUTPUT_DIR}/revzeta.csv"
    jobs: int = Field(default=JOBS, ge=1)
    gnuplot: bool = False

    @field_validator("s_values")
    @classmethod
    def _check_s_values(cls, values: List[int]) -> List[int]:
        if not values or min(values) < 2:
            raise ValueError("s_values must be integers >= 2")
        return values

    @field_validator("epsilon_grid")
    @classmethod
    def _check_epsilons(cls, values: List[float]) -> List[float]:
        if len(values) < 2 or any(e <= 0 for e in values):
            raise ValueError("epsilon_grid needs at least two positive steps")
        return sorted(values, reverse=True)

    @model_validator(mode="after")
    def _check_run(self) -> "RunConfig":
        if not self.b > self.a:
            raise ValueError(f"interval must satisfy a < b, got [{self.a}, {self.b}]")
        if self.command == Command.DELTA_SWEEP:
            if self.bump is None or not self.bump.centers:
                raise ValueError("delta-sweep needs bump.delta and bump.c or bump.c_grid")
        if self.command == Command.ORACLE_COMPARE and self.profile.kind != ProfileKind.CONSTANT:
            raise ValueError("oracle-compare runs on constant profiles only")
        if self.bump is not None:
            lo, hi = self.a + self.bump.delta, self.b - self.bump.delta
            slack = SUPPORT_SLACK * (self.b - self.a)
            outside = [c for c in self.bump.centers if c < lo - slack or c > hi + slack]
            if outside:
                raise ValueError(f"bump centers {outside} are not inside [{lo:g}, {hi:g}]")
        return self

    @property
    def quadrature_spec(self) -> QuadratureSpec:
        return self.tolerances.quadrature_spec(self.K_cap)


class SweepRow(BaseModel):
    """One point of an energy-change sweep"""
    c: float
    delta_E: float
    err_estimate: float = Field(ge=0)
    K_used: int
