"""Smooth compactly supported test functions for weak-form residuals."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TestFunction:
    """phi(t, x) = eta(t) psi(x) (1 + tilt . (x - center)).

    eta(t) = (1 - t/t_end)^4 on [0, t_end), 0 after; psi(x) = (1 - |x-c|^2/R^2)^4
    inside the ball of radius R, 0 outside. Both factors are C^3.
    """

    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    radius: float = 0.5
    t_end: float = 1.0
    tilt: tuple[float, float, float] = (0.0, 0.0, 0.0)

    __test__ = False  # not a pytest class

    def _eta(self, t: float) -> tuple[float, float]:
        if t >= self.t_end:
            return 0.0, 0.0
        s = 1.0 - t / self.t_end
        return s ** 4, -4.0 * s ** 3 / self.t_end

    def _space(self, x1, x2, x3):
        c = self.center
        d = [np.asarray(x1, float) - c[0], np.asarray(x2, float) - c[1], np.asarray(x3, float) - c[2]]
        q = (d[0] ** 2 + d[1] ** 2 + d[2] ** 2) / self.radius ** 2
        inside = q < 1.0
        base = np.where(inside, 1.0 - q, 0.0)
        psi = base ** 4
        dpsi_dq = -4.0 * base ** 3
        lin = 1.0 + self.tilt[0] * d[0] + self.tilt[1] * d[1] + self.tilt[2] * d[2]
        value = psi * lin
        grad = np.stack([
            dpsi_dq * 2.0 * d[j] / self.radius ** 2 * lin + psi * self.tilt[j] for j in range(3)
        ])
        return value, grad

    def value(self, t: float, x1, x2, x3) -> np.ndarray:
        eta, _ = self._eta(t)
        return eta * self._space(x1, x2, x3)[0]

    def dt(self, t: float, x1, x2, x3) -> np.ndarray:
        _, deta = self._eta(t)
        return deta * self._space(x1, x2, x3)[0]

    def grad(self, t: float, x1, x2, x3) -> np.ndarray:
        """Spatial gradient, shape (3,) + x1.shape."""
        eta, _ = self._eta(t)
        return eta * self._space(x1, x2, x3)[1]

    def vanishes_after(self, t: float) -> bool:
        return t >= self.t_end
