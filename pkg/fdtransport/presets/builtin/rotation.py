"""Rigid rotation about e3, smoothly cut off inside the unit ball."""

from __future__ import annotations

from typing import Any, Callable

import numpy as np

from fdtransport.fields.averaging import VelocitySampler
from fdtransport.grid.lattice import Domain
from fdtransport.presets.base import ExactFlow, PresetParam, VelocityPreset, cutoff
from fdtransport.presets.registry import register_preset


def swirl(angular: Callable[[np.ndarray], np.ndarray]):
    """v(x) = w(|x|) (-x2, x1, 0) for a radial angular speed w.

    Divergence-free for every radial w, and |x| is constant along its
    trajectories, so the flow is a rotation by w(|xi|) (s - t0).
    """

    def fn(t, x1, x2, x3):
        w = angular(np.sqrt(x1 ** 2 + x2 ** 2 + x3 ** 2))
        return np.stack([-w * x2, w * x1, np.zeros_like(w * x3)])

    def flow(s: float, t0: float, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        theta = angular(np.linalg.norm(pts, axis=1)) * (s - t0)
        c, sn = np.cos(theta), np.sin(theta)
        out = pts.copy()
        out[:, 0] = c * pts[:, 0] - sn * pts[:, 1]
        out[:, 1] = sn * pts[:, 0] + c * pts[:, 1]
        return out.reshape(np.shape(points))

    return fn, flow


@register_preset
class RigidRotation(VelocityPreset):

    @property
    def name(self) -> str:
        return "rotation"

    @property
    def description(self) -> str:
        return "Rigid rotation about e3 with angular speed omega for |x| <= r_inner, C^4 cutoff to 0 at r_outer"

    def parameters(self) -> list[PresetParam]:
        return [
            PresetParam("omega", "float", 1.0, "angular speed", -100.0, 100.0),
            PresetParam("r_inner", "float", 0.7, "radius of the rigid core", 0.0, 10.0),
            PresetParam("r_outer", "float", 0.95, "support radius", 0.0, 10.0),
        ]

    def _angular(self, params: dict[str, Any]):
        omega, r_in, r_out = params["omega"], params["r_inner"], params["r_outer"]
        return lambda r: omega * cutoff(r, r_in, r_out)

    def build(self, params: dict[str, Any]) -> VelocitySampler:
        fn, _ = swirl(self._angular(params))
        r = params["r_outer"]
        return VelocitySampler(
            fn=fn,
            support=Domain.ball((0.0, 0.0, 0.0), r),
            steady=True,
            smooth=True,
            name=self.name,
        )

    def exact_flow(self, params: dict[str, Any]) -> ExactFlow:
        _, flow = swirl(self._angular(self.validate_params(params)))
        return flow
