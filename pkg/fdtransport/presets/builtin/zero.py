"""v = 0."""

from __future__ import annotations

from typing import Any

import numpy as np

from fdtransport.fields.averaging import VelocitySampler
from fdtransport.presets.base import ExactFlow, VelocityPreset
from fdtransport.presets.registry import register_preset


@register_preset
class ZeroVelocity(VelocityPreset):

    @property
    def name(self) -> str:
        return "zero"

    @property
    def description(self) -> str:
        return "Zero velocity; the schemes reduce to pure averaging"

    def build(self, params: dict[str, Any]) -> VelocitySampler:
        return VelocitySampler.zero()

    def exact_flow(self, params: dict[str, Any]) -> ExactFlow:
        return lambda s, t0, points: np.array(points, dtype=float)
