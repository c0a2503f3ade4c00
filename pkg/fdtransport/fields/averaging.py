"""Cell-averaged initial data g^0 and space-time averaged velocity u^n."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from fdtransport.errors import DataError, PreconditionError
from fdtransport.fields.quadrature import cell_average, space_time_average
from fdtransport.fields.timegrid import TimeGrid
from fdtransport.grid.field import ScalarField, VectorField
from fdtransport.grid.lattice import Domain, DomainMask, GridSpec

logger = logging.getLogger(__name__)

VelocityFn = Callable[[float, np.ndarray, np.ndarray, np.ndarray], np.ndarray]
ScalarFn = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


@dataclass
class VelocitySampler:
    """v(t, x) with a declared support; returns 0 outside it.

    fn(t, x1, x2, x3) returns an array of shape (3,) + x1.shape.
    """

    fn: VelocityFn
    support: Domain | None = None
    divergence_free: bool = True
    steady: bool = False
    smooth: bool = True
    name: str = "velocity"

    def __call__(self, t: float, x1, x2, x3) -> np.ndarray:
        x1, x2, x3 = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float), np.asarray(x3, float))
        v = np.broadcast_to(np.asarray(self.fn(t, x1, x2, x3), dtype=float), (3,) + x1.shape)
        if self.support is not None:
            v = np.where(self.support.contains(x1, x2, x3), v, 0.0)
        return v

    def at_points(self, t: float, points: np.ndarray) -> np.ndarray:
        """Velocity at an (n, 3) array of points, shape (n, 3)."""
        points = np.asarray(points, dtype=float)
        return self(t, points[..., 0], points[..., 1], points[..., 2]).T

    @classmethod
    def zero(cls) -> "VelocitySampler":
        return cls(fn=lambda t, x1, x2, x3: np.zeros((3,) + np.shape(x1)), steady=True, name="zero")


@dataclass
class SampledData:
    """Initial data given as samples on a regular grid, interpolated trilinearly.

    axes are the three 1-D coordinate arrays, values has shape
    (len(axes[0]), len(axes[1]), len(axes[2])). Outside the sampled box the
    data reads 0.
    """

    axes: tuple[np.ndarray, np.ndarray, np.ndarray]
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(self.values)):
            raise DataError("sampled initial data contains non-finite values")
        self._interp = RegularGridInterpolator(
            tuple(np.asarray(a, dtype=float) for a in self.axes),
            self.values,
            method="linear",
            bounds_error=False,
            fill_value=0.0,
        )

    def __call__(self, x1, x2, x3) -> np.ndarray:
        x1, x2, x3 = np.broadcast_arrays(x1, x2, x3)
        pts = np.stack([x1.ravel(), x2.ravel(), x3.ravel()], axis=-1)
        return self._interp(pts).reshape(x1.shape)


def _check_finite(values: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(values)):
        bad = int(np.size(values) - np.count_nonzero(np.isfinite(values)))
        raise DataError(f"{what}: {bad} non-finite quadrature samples")


def average_initial(
    f0: ScalarFn | SampledData,
    grid: GridSpec,
    quadrature_order: int = 3,
    domain: Domain | None = None,
    mask: np.ndarray | None = None,
) -> ScalarField:
    """g^0(x) = (1/h^3) * integral over C_h(x) of the zero extension of f0.

    If `domain` is given, f0 is cut to zero outside it before averaging. `mask`
    (aligned with the base window) restricts g^0 afterwards.
    """
    if domain is not None:
        raw = f0

        def f0(x1, x2, x3):
            return np.where(domain.contains(x1, x2, x3), raw(x1, x2, x3), 0.0)

    x1, x2, x3 = grid.coords()
    values = cell_average(f0, x1, x2, x3, grid.h, quadrature_order)
    _check_finite(values, "initial data")
    return ScalarField(grid, values, (0, 0, 0), mask)


def average_velocity(
    v: VelocitySampler,
    grid: GridSpec,
    timegrid: TimeGrid,
    n: int,
    quadrature_order: int = 3,
    mask: DomainMask | None = None,
) -> VectorField:
    """u^n(x) = (1/tau h^3) * integral over [tau n, tau(n+1)] x C_h(x) of v.

    The result vanishes outside Omega_h when a mask is given.
    """
    if n < 0 or n > max(timegrid.num_steps - 1, 0):
        raise PreconditionError(f"step index {n} outside 0 .. {timegrid.num_steps - 1}")
    member = mask.interior if mask is not None else None
    if member is not None:
        lo, hi = mask.bounding_box()
        shape = tuple(b - a + 1 for a, b in zip(lo, hi))
    else:
        lo, shape = (0, 0, 0), grid.dims
    x1, x2, x3 = grid.coords(lo, shape)
    time_order = 1 if v.steady else None
    values = space_time_average(
        v, timegrid.t(n), timegrid.tau, x1, x2, x3, grid.h, quadrature_order, time_order
    )
    _check_finite(values, f"velocity step {n}")
    u = VectorField.from_arrays(grid, values, lo).window((0, 0, 0), grid.dims)
    if member is not None:
        u = u.restricted(member)
    return u


class StepVelocities:
    """u^n on demand for a run; a steady field is averaged once and reused."""

    def __init__(
        self,
        v: VelocitySampler,
        grid: GridSpec,
        timegrid: TimeGrid,
        quadrature_order: int = 3,
        mask: DomainMask | None = None,
    ):
        self.v = v
        self.grid = grid
        self.timegrid = timegrid
        self.quadrature_order = quadrature_order
        self.mask = mask
        self._steady: VectorField | None = None

    def __call__(self, n: int) -> VectorField:
        if self.v.steady:
            if self._steady is None:
                self._steady = average_velocity(
                    self.v, self.grid, self.timegrid, 0, self.quadrature_order, self.mask
                )
                logger.debug(f"averaged steady velocity '{self.v.name}' once")
            return self._steady
        return average_velocity(self.v, self.grid, self.timegrid, n, self.quadrature_order, self.mask)
