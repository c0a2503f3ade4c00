"""Report records shared across modules."""

from __future__ import annotations

from enum import Enum

from pydantic import BaseModel, Field


class Scheme(str, Enum):
    EXPLICIT = "explicit"
    IMPLICIT = "implicit"


class VelocityNorms(BaseModel):
    """Per-component data norms entering the truncation bound.

    grad_l2l2[j] = ||grad v_j||_{L^2(0,T; L^2)}, linf_l2[j] = ||v_j||_{L^inf(0,T; L^2)}.
    """

    T: float
    grad_l2l2: list[float]
    linf_l2: list[float]
    fine_spacing: float

    @property
    def m1_components(self) -> list[float]:
        return [
            48.0 ** 1.5 * self.T ** 0.25 * g ** 1.5 * s ** 1.5
            for g, s in zip(self.grad_l2l2, self.linf_l2)
        ]

    @property
    def m1(self) -> float:
        return float(sum(self.m1_components))


class TruncationReport(BaseModel):
    h: float
    tau: float
    beta: float
    steps: int
    measure: float = 0.0
    measure_components: list[float] = Field(default_factory=lambda: [0.0, 0.0, 0.0])
    neighbourhood_measure: float = 0.0
    m1: float = 0.0
    m1_components: list[float] = Field(default_factory=lambda: [0.0, 0.0, 0.0])
    bound: float = 0.0
    l3_sums: list[float] = Field(default_factory=lambda: [0.0, 0.0, 0.0])
    max_central_div_truncated: float = 0.0
    central_div_bound: float = 0.0

    @property
    def measure_ok(self) -> bool:
        return self.measure <= self.bound

    def l3_ok(self, slack: float = 0.01) -> bool:
        return all(s <= m * (1.0 + slack) for s, m in zip(self.l3_sums, self.m1_components))

    @property
    def neighbourhood_ok(self) -> bool:
        return self.neighbourhood_measure <= 3.0 * self.measure * (1.0 + 1e-12)


class StepDiagnostics(BaseModel):
    """Per-step scalars recorded by the time-stepping loops."""

    n: int
    t: float
    sup: float
    max: float
    min: float
    norms: dict[str, float] = Field(default_factory=dict)
    div_terms: dict[str, float] = Field(default_factory=dict)
    window: list[int] = Field(default_factory=list)
    solver_iterations: int | None = None
    solver_residual: float | None = None
    hhd_residual: float | None = None


class ArtifactEntry(BaseModel):
    path: str
    kind: str
    size: int
    sha256: str


class Manifest(BaseModel):
    name: str
    scheme: str
    exit_code: int = 0
    metadata: dict = Field(default_factory=dict)
    files: list[ArtifactEntry] = Field(default_factory=list)
