"""Vortex with angular speed ~ |x|^(-exponent): unbounded velocity, grad v in L^2."""

from __future__ import annotations

from typing import Any

import numpy as np

from fdtransport.fields.averaging import VelocitySampler
from fdtransport.grid.lattice import Domain
from fdtransport.presets.base import ExactFlow, PresetParam, VelocityPreset, cutoff
from fdtransport.presets.builtin.rotation import swirl
from fdtransport.presets.registry import register_preset


@register_preset
class SteepVortex(VelocityPreset):
    smooth = False

    @property
    def name(self) -> str:
        return "steep_vortex"

    @property
    def description(self) -> str:
        return (
            "Swirl with angular speed strength*|x|^(-exponent); |v| blows up at the origin for "
            "exponent > 1 while grad v stays square integrable for exponent < 3/2"
        )

    def parameters(self) -> list[PresetParam]:
        return [
            PresetParam("strength", "float", 4.0, "angular speed at |x| = 1", 0.0, 1e3),
            PresetParam("exponent", "float", 1.4, "singularity exponent", 0.0, 1.49),
            PresetParam("r_inner", "float", 0.5, "cutoff start", 0.0, 10.0),
            PresetParam("r_outer", "float", 0.9, "support radius", 0.0, 10.0),
        ]

    def _angular(self, params: dict[str, Any]):
        a, e = params["strength"], params["exponent"]
        r_in, r_out = params["r_inner"], params["r_outer"]

        def angular(r):
            r = np.asarray(r, dtype=float)
            safe = np.where(r > 0.0, r, 1.0)
            return np.where(r > 0.0, a * safe ** (-e), 0.0) * cutoff(r, r_in, r_out)

        return angular

    def build(self, params: dict[str, Any]) -> VelocitySampler:
        fn, _ = swirl(self._angular(params))
        return VelocitySampler(
            fn=fn,
            support=Domain.ball((0.0, 0.0, 0.0), params["r_outer"]),
            steady=True,
            smooth=False,
            name=self.name,
        )

    def exact_flow(self, params: dict[str, Any]) -> ExactFlow:
        _, flow = swirl(self._angular(self.validate_params(params)))
        return flow
