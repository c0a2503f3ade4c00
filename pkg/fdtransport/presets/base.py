"""Base preset classes - velocity fields and initial data selectable by name."""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from fdtransport.errors import ConfigError
from fdtransport.fields.averaging import ScalarFn, VelocitySampler

# Flow map in closed form: (s, t0, points (n, 3)) -> points (n, 3)
ExactFlow = Callable[[float, float, np.ndarray], np.ndarray]


@dataclass
class PresetParam:
    """Defines a single tunable parameter for a preset."""

    name: str
    type: str  # 'int', 'float', 'vector'
    default: Any
    description: str = ""
    min_val: float | None = None
    max_val: float | None = None


@dataclass
class SphereSurface:
    """Level surface {f0 = c} of an initial preset, when it is a sphere."""

    center: np.ndarray
    radius: float
    inside_is_super_level: bool = True


def smootherstep(s: np.ndarray) -> np.ndarray:
    """C^4 step: 0 for s <= 0, 1 for s >= 1, degree-9 polynomial between."""
    s = np.clip(s, 0.0, 1.0)
    return s ** 5 * (126.0 - 420.0 * s + 540.0 * s ** 2 - 315.0 * s ** 3 + 70.0 * s ** 4)


def smootherstep_prime(s: np.ndarray) -> np.ndarray:
    inside = (s > 0.0) & (s < 1.0)
    s = np.clip(s, 0.0, 1.0)
    d = 630.0 * s ** 4 * (1.0 - s) ** 4
    return np.where(inside, d, 0.0)


def cutoff(r: np.ndarray, r_inner: float, r_outer: float) -> np.ndarray:
    """chi(r) = 1 for r <= r_inner, 0 for r >= r_outer, C^4 in between."""
    return 1.0 - smootherstep((np.asarray(r, dtype=float) - r_inner) / (r_outer - r_inner))


def cutoff_prime(r: np.ndarray, r_inner: float, r_outer: float) -> np.ndarray:
    width = r_outer - r_inner
    return -smootherstep_prime((np.asarray(r, dtype=float) - r_inner) / width) / width


class BasePreset(ABC):
    """Abstract base class for named presets.

    Subclasses must implement:
    - name: preset identifier (snake_case)
    - kind: "velocity" or "initial"
    - description: what the preset is
    - parameters(): list of tunable parameters
    """

    @property
    @abstractmethod
    def name(self) -> str:
        ...

    @property
    @abstractmethod
    def kind(self) -> str:
        ...

    @property
    @abstractmethod
    def description(self) -> str:
        ...

    def parameters(self) -> list[PresetParam]:
        return []

    def validate_params(self, params: dict[str, Any] | None) -> dict[str, Any]:
        """Fill defaults and check types and bounds; unknown keys are rejected."""
        params = dict(params or {})
        known = {p.name for p in self.parameters()}
        unknown = set(params) - known
        if unknown:
            raise ConfigError(f"preset '{self.name}' has no parameters {sorted(unknown)}; known: {sorted(known)}")
        validated = {}
        for p in self.parameters():
            val = params.get(p.name, p.default)
            try:
                if p.type == "int":
                    val = int(val)
                elif p.type == "float":
                    val = float(val)
                elif p.type == "vector":
                    val = tuple(float(v) for v in val)
                    if len(val) != 3:
                        raise ValueError("expected three components")
            except (ValueError, TypeError) as e:
                raise ConfigError(f"preset '{self.name}' parameter '{p.name}': {e}") from e
            if isinstance(val, (int, float)):
                if p.min_val is not None and val < p.min_val:
                    raise ConfigError(f"preset '{self.name}': {p.name}={val} below {p.min_val}")
                if p.max_val is not None and val > p.max_val:
                    raise ConfigError(f"preset '{self.name}': {p.name}={val} above {p.max_val}")
            validated[p.name] = val
        return validated


class VelocityPreset(BasePreset):
    """Divergence-free velocity field already extended by zero outside its support."""

    kind = "velocity"
    steady = True
    smooth = True

    @abstractmethod
    def build(self, params: dict[str, Any]) -> VelocitySampler:
        ...

    def exact_flow(self, params: dict[str, Any]) -> ExactFlow | None:
        """Closed-form flow map, if the preset has one."""
        return None

    def sampler(self, params: dict[str, Any] | None = None) -> VelocitySampler:
        return self.build(self.validate_params(params))


class InitialPreset(BasePreset):
    """Initial datum f0(x), vectorized over meshgrid arrays."""

    kind = "initial"
    smooth = True

    @abstractmethod
    def build(self, params: dict[str, Any]) -> ScalarFn:
        ...

    def level_surface(self, params: dict[str, Any], level: float) -> SphereSurface | None:
        """Analytic description of {f0 = level}, if known."""
        return None

    def function(self, params: dict[str, Any] | None = None) -> ScalarFn:
        return self.build(self.validate_params(params))

