"""
Custom preset template.

Copy this file and modify build() to add your own velocity field or initial
data. Files placed in user_presets/ are loaded by auto_discover().
"""

from __future__ import annotations

from typing import Any

import numpy as np

from fdtransport.fields.averaging import VelocitySampler
from fdtransport.grid.lattice import Domain
from fdtransport.presets.base import PresetParam, VelocityPreset, cutoff
from fdtransport.presets.builtin.rotation import swirl
from fdtransport.presets.registry import register_preset


@register_preset
class GaussianSwirl(VelocityPreset):
    """Swirl about e3 whose angular speed decays like a Gaussian in |x|."""

    @property
    def name(self) -> str:
        return "user_gaussian_swirl"

    @property
    def description(self) -> str:
        return "Example user preset: angular speed peak * exp(-|x|^2 / 2 width^2), cut off at r_outer"

    def parameters(self) -> list[PresetParam]:
        return [
            PresetParam("peak", "float", 2.0, "angular speed at the origin"),
            PresetParam("width", "float", 0.3, "decay length", 1e-3, 10.0),
            PresetParam("r_outer", "float", 0.9, "support radius", 0.0, 10.0),
        ]

    def build(self, params: dict[str, Any]) -> VelocitySampler:
        peak, width, r_out = params["peak"], params["width"], params["r_outer"]

        def angular(r):
            return peak * np.exp(-(r ** 2) / (2.0 * width ** 2)) * cutoff(r, 0.6 * r_out, r_out)

        fn, _ = swirl(angular)
        return VelocitySampler(
            fn=fn,
            support=Domain.ball((0.0, 0.0, 0.0), r_out),
            steady=True,
            name=self.name,
        )
