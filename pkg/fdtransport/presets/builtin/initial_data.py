"""Built-in initial data."""

from __future__ import annotations

import math
from typing import Any

import numpy as np

from fdtransport.presets.base import InitialPreset, PresetParam, SphereSurface, cutoff
from fdtransport.presets.registry import register_preset


def _dist(x1, x2, x3, center) -> np.ndarray:
    return np.sqrt((x1 - center[0]) ** 2 + (x2 - center[1]) ** 2 + (x3 - center[2]) ** 2)


@register_preset
class GaussianBump(InitialPreset):

    @property
    def name(self) -> str:
        return "gaussian_bump"

    @property
    def description(self) -> str:
        return "amplitude * exp(-|x-c|^2 / 2 width^2), C^4 cutoff between r_inner and r_outer from c"

    def parameters(self) -> list[PresetParam]:
        return [
            PresetParam("center", "vector", (0.4, 0.0, 0.0), "bump center"),
            PresetParam("width", "float", 0.15, "standard deviation", 1e-6, 10.0),
            PresetParam("amplitude", "float", 1.0, "peak value"),
            PresetParam("r_inner", "float", 0.2, "cutoff start", 0.0, 10.0),
            PresetParam("r_outer", "float", 0.3, "support radius", 0.0, 10.0),
        ]

    def build(self, params: dict[str, Any]):
        c, w, a = params["center"], params["width"], params["amplitude"]
        r_in, r_out = params["r_inner"], params["r_outer"]

        def f0(x1, x2, x3):
            d = _dist(x1, x2, x3, c)
            return a * np.exp(-(d ** 2) / (2.0 * w ** 2)) * cutoff(d, r_in, r_out)

        return f0


@register_preset
class SphereLevelSet(InitialPreset):

    @property
    def name(self) -> str:
        return "sphere"

    @property
    def description(self) -> str:
        return "2^(1 - |x-c|^2 / radius^2) with C^4 cutoff; its level 1 set is the sphere |x-c| = radius"

    def parameters(self) -> list[PresetParam]:
        return [
            PresetParam("center", "vector", (0.2, 0.0, 0.0), "sphere center"),
            PresetParam("radius", "float", 0.5, "radius of the level-1 sphere", 1e-6, 10.0),
            PresetParam("r_inner", "float", 0.6, "cutoff start", 0.0, 10.0),
            PresetParam("r_outer", "float", 0.75, "support radius", 0.0, 10.0),
        ]

    def build(self, params: dict[str, Any]):
        c, r0 = params["center"], params["radius"]
        r_in, r_out = params["r_inner"], params["r_outer"]

        def f0(x1, x2, x3):
            d = _dist(x1, x2, x3, c)
            return np.power(2.0, 1.0 - d ** 2 / r0 ** 2) * cutoff(d, r_in, r_out)

        return f0

    def level_surface(self, params: dict[str, Any], level: float) -> SphereSurface | None:
        params = self.validate_params(params)
        if not 0.0 < level < 2.0:
            return None
        radius = params["radius"] * math.sqrt(1.0 - math.log2(level))
        if radius > params["r_inner"]:
            return None
        return SphereSurface(center=np.asarray(params["center"]), radius=radius)


@register_preset
class Cone(InitialPreset):
    smooth = False

    @property
    def name(self) -> str:
        return "cone"

    @property
    def description(self) -> str:
        return "peak - |x-c| (no cutoff); level set peak - r is the sphere of radius r"

    def parameters(self) -> list[PresetParam]:
        return [
            PresetParam("center", "vector", (0.0, 0.0, 0.0), "apex"),
            PresetParam("peak", "float", 2.0, "value at the apex"),
        ]

    def build(self, params: dict[str, Any]):
        c, peak = params["center"], params["peak"]
        return lambda x1, x2, x3: peak - _dist(x1, x2, x3, c)

    def level_surface(self, params: dict[str, Any], level: float) -> SphereSurface | None:
        params = self.validate_params(params)
        radius = params["peak"] - level
        if radius <= 0:
            return None
        return SphereSurface(center=np.asarray(params["center"]), radius=radius)


@register_preset
class Affine(InitialPreset):

    @property
    def name(self) -> str:
        return "affine"

    @property
    def description(self) -> str:
        return "offset + slope . x"

    def parameters(self) -> list[PresetParam]:
        return [
            PresetParam("offset", "float", 0.0, "constant term"),
            PresetParam("slope", "vector", (1.0, 0.0, 0.0), "gradient"),
        ]

    def build(self, params: dict[str, Any]):
        a, b = params["offset"], params["slope"]
        return lambda x1, x2, x3: a + b[0] * x1 + b[1] * x2 + b[2] * x3


@register_preset
class Quadratic(InitialPreset):

    @property
    def name(self) -> str:
        return "quadratic"

    @property
    def description(self) -> str:
        return "offset + sum_i q_i x_i^2"

    def parameters(self) -> list[PresetParam]:
        return [
            PresetParam("offset", "float", 0.0, "constant term"),
            PresetParam("coefficients", "vector", (1.0, 1.0, 1.0), "q_1, q_2, q_3"),
        ]

    def build(self, params: dict[str, Any]):
        a, q = params["offset"], params["coefficients"]
        return lambda x1, x2, x3: a + q[0] * x1 ** 2 + q[1] * x2 ** 2 + q[2] * x3 ** 2
