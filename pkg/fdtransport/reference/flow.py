"""Characteristic flow map X(s, t0, xi): x'(s) = v(s, x(s)), x(t0) = xi."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from fdtransport.errors import ConfigError, DomainError, SolverError
from fdtransport.fields.averaging import VelocitySampler
from fdtransport.grid.lattice import Domain
from fdtransport.presets.base import ExactFlow

logger = logging.getLogger(__name__)

METHODS = ("rk4", "rk45", "exact")


@dataclass
class FlowMap:
    """Integrates trajectories of many points at once.

    method "rk4" takes fixed substeps of at most `max_substep`, "rk45" is
    scipy's adaptive Runge-Kutta, "exact" uses the preset's closed form.
    Trajectories leaving `box` (grown by `escape_margin`) raise DomainError.
    """

    v: VelocitySampler
    method: str = "rk4"
    max_substep: float = 1e-3
    rtol: float = 1e-10
    atol: float = 1e-12
    exact: ExactFlow | None = None
    box: Domain | None = None
    escape_margin: float = 0.1

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown flow method '{self.method}' (choose from {METHODS})")
        if self.method == "exact" and self.exact is None:
            raise ConfigError(f"velocity '{self.v.name}' has no closed-form flow; use rk4 or rk45")
        if not self.max_substep > 0:
            raise ConfigError(f"flow substep must be positive, got {self.max_substep}")

    @classmethod
    def for_run(cls, v: VelocitySampler, tau: float, T: float, **kwargs) -> "FlowMap":
        """Substep min(tau/4, 1e-3 T)."""
        return cls(v=v, max_substep=min(tau / 4.0, 1e-3 * T), **kwargs)

    def __call__(self, s: float, t0: float, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        flat = pts.reshape(-1, 3)
        if s == t0 or len(flat) == 0:
            return pts.copy()
        if self.method == "exact":
            out = np.asarray(self.exact(s, t0, flat), dtype=float).reshape(-1, 3)
        elif self.method == "rk4":
            out = self._rk4(s, t0, flat)
        else:
            out = self._rk45(s, t0, flat)
        self._check_escape(out)
        return out.reshape(pts.shape)

    def _rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        return self.v(t, y[:, 0], y[:, 1], y[:, 2]).T

    def _rk4(self, s: float, t0: float, y: np.ndarray) -> np.ndarray:
        n = max(1, int(math.ceil(abs(s - t0) / self.max_substep - 1e-12)))
        dt = (s - t0) / n
        t = t0
        y = y.copy()
        for i in range(n):
            k1 = self._rhs(t, y)
            k2 = self._rhs(t + dt / 2.0, y + dt * k1 / 2.0)
            k3 = self._rhs(t + dt / 2.0, y + dt * k2 / 2.0)
            k4 = self._rhs(t + dt, y + dt * k3)
            y = y + dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
            t = t0 + (i + 1) * dt
        return y

    def _rk45(self, s: float, t0: float, y: np.ndarray) -> np.ndarray:
        shape = y.shape

        def fun(t, flat):
            return self._rhs(t, flat.reshape(shape)).ravel()

        sol = solve_ivp(fun, (t0, s), y.ravel(), method="RK45", rtol=self.rtol, atol=self.atol)
        if not sol.success:
            raise SolverError(f"RK45 flow integration failed: {sol.message}")
        return sol.y[:, -1].reshape(shape)

    def _check_escape(self, y: np.ndarray) -> None:
        if self.box is None:
            return
        lo = self.box.lower - self.escape_margin
        hi = self.box.upper + self.escape_margin
        out = np.any((y < lo) | (y > hi), axis=1)
        if out.any():
            raise DomainError(f"{int(out.sum())} trajectories left the domain box by more than {self.escape_margin}")


def flow(
    v: VelocitySampler,
    s: float,
    t0: float,
    xi,
    method: str = "rk4",
    max_substep: float = 1e-3,
    exact: ExactFlow | None = None,
) -> np.ndarray:
    """X(s, t0, xi) for one point (shape (3,)) or many (shape (n, 3))."""
    return FlowMap(v=v, method=method, max_substep=max_substep, exact=exact)(s, t0, xi)
