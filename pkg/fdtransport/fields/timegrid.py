"""Time discretization and the (alpha, beta, h, tau) scheme parameters."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from fdtransport.errors import ConfigError

CFL_LIMIT = 2.0 / 7.0


@dataclass(frozen=True)
class TimeGrid:
    """Steps t_n = n * tau for n = 0 .. num_steps, with T in [tau*num_steps, tau*num_steps + tau)."""

    tau: float
    T: float
    num_steps: int = field(init=False)

    def __post_init__(self):
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise ConfigError(f"time step must be positive, got tau={self.tau}")
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ConfigError(f"final time must be positive, got T={self.T}")
        n = int(math.floor(self.T / self.tau))
        # floor() can be off by one when T / tau is within rounding of an integer
        while self.tau * n > self.T:
            n -= 1
        while self.tau * (n + 1) <= self.T:
            n += 1
        object.__setattr__(self, "num_steps", n)

    def t(self, n: int) -> float:
        return n * self.tau

    def step_of(self, t: float) -> int:
        """n with t in [t_n, t_{n+1})."""
        n = int(math.floor(t / self.tau))
        while self.tau * n > t:
            n -= 1
        while self.tau * (n + 1) <= t:
            n += 1
        return n

    def times(self) -> list[float]:
        return [self.t(n) for n in range(self.num_steps + 1)]


@dataclass(frozen=True)
class SchemeParams:
    """Scaling parameters of the explicit scheme.

    In the rough setting tau = h^(2 - alpha) and velocities are truncated at
    h^(-beta). `tau_branch` records how tau was chosen ("power" for
    h^(2 - alpha), "hyperbolic" for the smooth-case CFL scale, "given").
    """

    alpha: float
    beta: float
    h: float
    tau: float
    truncate: bool = True
    tau_branch: str = "power"
    cfl_margin: float | None = None

    @property
    def truncation_level(self) -> float:
        """h^(-beta); infinite when truncation is disabled."""
        if not self.truncate:
            return math.inf
        return self.h ** (-self.beta)

    @property
    def courant(self) -> float:
        """tau / 2h, the weight of the velocity in the stencil coefficients."""
        return self.tau / (2.0 * self.h)

    def annotated(self, **changes) -> "SchemeParams":
        return replace(self, **changes)

    @classmethod
    def scaled(cls, h: float, alpha: float = 0.25, beta: float = 0.625) -> "SchemeParams":
        """tau = h^(2 - alpha) with truncation at h^(-beta)."""
        if not h > 0:
            raise ConfigError(f"grid spacing must be positive, got h={h}")
        return cls(alpha=alpha, beta=beta, h=h, tau=h ** (2.0 - alpha))

    @classmethod
    def smooth(cls, h: float, v_max: float, alpha: float = 0.25, beta: float = 0.625) -> "SchemeParams":
        """Smooth-case scaling tau = min(h^(2 - alpha), (2/7) h / ||v||_inf), no truncation."""
        if not h > 0:
            raise ConfigError(f"grid spacing must be positive, got h={h}")
        tau_power = h ** (2.0 - alpha)
        if v_max > 0 and CFL_LIMIT * h / v_max < tau_power:
            return cls(alpha=alpha, beta=beta, h=h, tau=CFL_LIMIT * h / v_max,
                       truncate=False, tau_branch="hyperbolic")
        return cls(alpha=alpha, beta=beta, h=h, tau=tau_power, truncate=False, tau_branch="power")
