"""Taylor-Green-like cellular flow in the (x1, x2) plane, cut off radially."""

from __future__ import annotations

from typing import Any

import numpy as np

from fdtransport.fields.averaging import VelocitySampler
from fdtransport.grid.lattice import Domain
from fdtransport.presets.base import PresetParam, VelocityPreset, cutoff, cutoff_prime
from fdtransport.presets.registry import register_preset


@register_preset
class CellularFlow(VelocityPreset):

    @property
    def name(self) -> str:
        return "cellular"

    @property
    def description(self) -> str:
        return "v = curl(0, 0, chi(|x|) A sin(k pi x1) sin(k pi x2) / (k pi)); divergence-free, smooth, steady"

    def parameters(self) -> list[PresetParam]:
        return [
            PresetParam("amplitude", "float", 1.0, "peak speed of the cells", -100.0, 100.0),
            PresetParam("wavenumber", "float", 1.0, "cells per unit length / 2", 0.1, 20.0),
            PresetParam("r_inner", "float", 0.6, "cutoff start", 0.0, 10.0),
            PresetParam("r_outer", "float", 0.9, "support radius", 0.0, 10.0),
        ]

    def build(self, params: dict[str, Any]) -> VelocitySampler:
        a = params["amplitude"]
        k = np.pi * params["wavenumber"]
        r_in, r_out = params["r_inner"], params["r_outer"]

        def fn(t, x1, x2, x3):
            r = np.sqrt(x1 ** 2 + x2 ** 2 + x3 ** 2)
            chi = cutoff(r, r_in, r_out)
            dchi = cutoff_prime(r, r_in, r_out)
            safe = np.where(r > 0.0, r, 1.0)
            s = a * np.sin(k * x1) * np.sin(k * x2) / k
            d1 = np.where(r > 0.0, dchi * x1 / safe, 0.0) * s + chi * a * np.cos(k * x1) * np.sin(k * x2)
            d2 = np.where(r > 0.0, dchi * x2 / safe, 0.0) * s + chi * a * np.sin(k * x1) * np.cos(k * x2)
            return np.stack([d2, -d1, np.zeros_like(r)])

        return VelocitySampler(
            fn=fn,
            support=Domain.ball((0.0, 0.0, 0.0), r_out),
            steady=True,
            smooth=True,
            name=self.name,
        )
