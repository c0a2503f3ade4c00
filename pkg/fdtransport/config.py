"""Run configuration loader with Pydantic validation."""

from __future__ import annotations

import os
from pathlib import Path
from typing import Any, Literal, Optional

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from fdtransport.errors import ConfigError
from fdtransport.models import Scheme

load_dotenv()

CONFIG_DIR = Path(__file__).parent.parent / "config"
OUTPUT_DIR_ENV = "FDTRANSPORT_OUTPUT_DIR"

Vec3 = tuple[float, float, float]


class DomainConfig(BaseModel):
    kind: Literal["box", "ball"] = "box"
    lower: Vec3 = (-1.0, -1.0, -1.0)
    upper: Vec3 = (1.0, 1.0, 1.0)
    center: Vec3 = (0.0, 0.0, 0.0)
    radius: float = Field(1.0, gt=0)


class GridConfig(BaseModel):
    h: Optional[float] = Field(None, gt=0)
    resolution: Optional[int] = Field(None, ge=2)  # cells per unit length, h = 1 / resolution
    margin: int = Field(2, ge=1)

    @model_validator(mode="after")
    def _one_of(self):
        if (self.h is None) == (self.resolution is None):
            raise ValueError("set exactly one of grid.h and grid.resolution")
        return self

    @property
    def spacing(self) -> float:
        return self.h if self.h is not None else 1.0 / self.resolution


class ExplicitConfig(BaseModel):
    alpha: float = 0.25
    beta: float = 0.625
    # tau = min(h^(2-alpha), (2/7) h / |v|_inf) without truncation; the rough
    # scaling needs h^(1-(alpha+beta)) <= 2/7, i.e. h below ~4e-5 for the defaults
    smooth_mode: bool = True
    window_margin: int = Field(4, ge=1)


class ImplicitConfig(BaseModel):
    tau: Optional[float] = Field(None, gt=0)
    tau_over_h: float = Field(1.0, gt=0)
    cache_projection: Optional[bool] = None

    def step(self, h: float) -> float:
        return self.tau if self.tau is not None else self.tau_over_h * h


class TimeConfig(BaseModel):
    T: float = Field(1.0, gt=0)


class VelocityConfig(BaseModel):
    preset: Optional[str] = "rotation"
    path: Optional[str] = None  # tabulated CSV, see fdtransport.fields.tabulated
    params: dict[str, Any] = Field(default_factory=dict)
    steady: Optional[bool] = None

    @model_validator(mode="after")
    def _source(self):
        if (self.preset is None) == (self.path is None):
            raise ValueError("set exactly one of velocity.preset and velocity.path")
        return self


class InitialConfig(BaseModel):
    preset: Optional[str] = "gaussian_bump"
    path: Optional[str] = None  # field CSV with columns x, y, z, value
    params: dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _source(self):
        if (self.preset is None) == (self.path is None):
            raise ValueError("set exactly one of initial.preset and initial.path")
        return self


class QuadratureConfig(BaseModel):
    initial_order: int = Field(3, ge=1, le=12)
    velocity_order: int = Field(3, ge=1, le=12)


class LinearSolverConfig(BaseModel):
    tolerance: float = Field(1e-10, gt=0, lt=1)
    max_iterations: Optional[int] = Field(None, ge=1)
    restart: int = Field(50, ge=1)


class SolverConfig(BaseModel):
    hhd: LinearSolverConfig = Field(default_factory=LinearSolverConfig)
    implicit: LinearSolverConfig = Field(default_factory=LinearSolverConfig)


class OutputConfig(BaseModel):
    directory: str = "output"
    name: str = "run"
    snapshot_every: int = Field(0, ge=0)
    formats: list[Literal["csv", "vtk"]] = Field(default_factory=lambda: ["csv"])
    diagnostics: bool = True


class LevelSetConfig(BaseModel):
    enabled: bool = False
    level: float = 1.0
    orient_outward: bool = True
    refine: bool = True
    strategy: Literal["greedy", "axis"] = "greedy"
    patch_size: int = Field(8, ge=1)
    patch_aspect: float = Field(1.0, gt=0)
    gradient_floor: float = Field(0.0, ge=0)
    every: int = Field(0, ge=0)  # 0 = snapshot steps only


class OracleConfig(BaseModel):
    enabled: bool = False
    method: Literal["rk4", "rk45", "exact"] = "rk4"
    max_substep: Optional[float] = Field(None, gt=0)
    sample: Optional[int] = Field(20000, ge=1)
    every: int = Field(1, ge=1)
    fd_step: float = Field(2e-3, gt=0)
    cascade: bool = True


class RunConfig(BaseModel):
    scheme: Scheme = Scheme.EXPLICIT
    domain: DomainConfig = Field(default_factory=DomainConfig)
    grid: GridConfig = Field(default_factory=lambda: GridConfig(resolution=16))
    explicit: ExplicitConfig = Field(default_factory=ExplicitConfig)
    implicit: ImplicitConfig = Field(default_factory=ImplicitConfig)
    time: TimeConfig = Field(default_factory=TimeConfig)
    velocity: VelocityConfig = Field(default_factory=VelocityConfig)
    initial: InitialConfig = Field(default_factory=InitialConfig)
    quadrature: QuadratureConfig = Field(default_factory=QuadratureConfig)
    solver: Optional[SolverConfig] = Field(default_factory=SolverConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)
    levelset: LevelSetConfig = Field(default_factory=LevelSetConfig)
    oracle: OracleConfig = Field(default_factory=OracleConfig)
    norms: list[float] = Field(default_factory=lambda: [1.0, 2.0])
    seed: int = 0

    @field_validator("norms")
    @classmethod
    def _norms(cls, v: list[float]) -> list[float]:
        bad = [p for p in v if not p >= 1]
        if bad:
            raise ValueError(f"norm exponents must be >= 1 or inf, got {bad}")
        return v

    @model_validator(mode="after")
    def _cross_field(self):
        if self.scheme == Scheme.EXPLICIT:
            from fdtransport.fields.timegrid import SchemeParams
            from fdtransport.schemes.explicit import check_exponents, check_scaling

            e = self.explicit
            check_exponents(e.alpha, e.beta)
            if not e.smooth_mode:
                check_scaling(SchemeParams.scaled(self.grid.spacing, e.alpha, e.beta))
        if self.scheme == Scheme.IMPLICIT and self.solver is None:
            raise ValueError("the implicit scheme needs a solver section")
        return self

    @property
    def h(self) -> float:
        return self.grid.spacing

    def with_resolution(self, h: float) -> "RunConfig":
        """Copy with grid spacing h (used by convergence studies)."""
        return self.model_copy(update={"grid": GridConfig(h=h, margin=self.grid.margin)}, deep=True)


def _describe(err: ValidationError) -> str:
    parts = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "config"
        parts.append(f"{loc}: {e['msg']}")
    return "; ".join(parts)


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def build_config(raw: dict[str, Any]) -> RunConfig:
    """Validate a raw mapping; validation errors become ConfigError naming the field."""
    try:
        config = RunConfig(**raw)
    except ValidationError as e:
        raise ConfigError(_describe(e)) from e
    except ConfigError:
        raise
    except TypeError as e:
        raise ConfigError(f"config: {e}") from e
    out_env = os.getenv(OUTPUT_DIR_ENV)
    if out_env:
        config.output.directory = out_env
    return config


def load_config(config_path: Path | None = None, overrides: dict[str, Any] | None = None) -> RunConfig:
    """Load config from YAML file, override the output directory from env."""
    path = Path(config_path) if config_path else CONFIG_DIR / "default.yaml"

    raw: dict = {}
    if path.exists():
        try:
            with open(path, encoding="utf-8") as f:
                raw = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"{path}: {e}") from e
    elif config_path is not None:
        raise ConfigError(f"config file not found: {path}")
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")

    return build_config(_merge(raw, overrides or {}))
