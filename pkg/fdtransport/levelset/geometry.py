"""Discrete normals, mean curvature and area elements on interface points.

    nu = D+g / |D+g|                       (flipped to point out of Omega+ when orient_outward)
    m  = -s / |D+g| * (sum_i D2_i g - sum_ij D-_i D+_j g nu_i nu_j),  s = sign(nu . D+g)
    dS = |D+g| / |D+_i g| * h^2,           i = argmax_l |D+_l g| (smallest axis on ties)

With outward normals m = -div(nu), so a sphere of radius r gives m = -2/r.
"""

from __future__ import annotations

import logging

import numpy as np

from fdtransport.errors import DegenerateGeometryError
from fdtransport.grid.field import ScalarField
from fdtransport.grid.lattice import Index
from fdtransport.grid.operators import forward_diff, mixed_diff, second_diff
from fdtransport.levelset.interface import InterfacePointSet

logger = logging.getLogger(__name__)


class Stencils:
    """D+g, D2 g and D-_i D+_j g sampled at a set of lattice points."""

    def __init__(self, g: ScalarField, points: np.ndarray):
        gp = g.padded(2)
        rel = np.asarray(points, dtype=np.int64).reshape(-1, 3) - np.asarray(gp.lo)
        idx = (rel[:, 0], rel[:, 1], rel[:, 2])
        self.grad = np.stack([forward_diff(gp, i).values[idx] for i in (1, 2, 3)], axis=1)
        self.second = np.stack([second_diff(gp, i).values[idx] for i in (1, 2, 3)], axis=1)
        self.mixed = np.empty((len(rel), 3, 3))
        for i in (1, 2, 3):
            for j in (1, 2, 3):
                self.mixed[:, i - 1, j - 1] = mixed_diff(gp, i, j).values[idx]
        self.grad_norm = np.linalg.norm(self.grad, axis=1)


def _normals(st: Stencils, orient_outward: bool) -> np.ndarray:
    nu = st.grad / st.grad_norm[:, None]
    return -nu if orient_outward else nu


def _curvature(st: Stencils, nu: np.ndarray) -> np.ndarray:
    lap = st.second.sum(axis=1)
    hess_nn = np.einsum("kij,ki,kj->k", st.mixed, nu, nu)
    s = np.sign(np.einsum("ki,ki->k", nu, st.grad))
    return -s / st.grad_norm * (lap - hess_nn)


def area_elements(st: Stencils, h: float, axis: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """dS and the 1-based axis; `axis` forces the axis per point."""
    if axis is None:
        axis0 = np.argmax(np.abs(st.grad), axis=1)
    else:
        axis0 = np.asarray(axis, dtype=np.int64) - 1
    denom = np.abs(st.grad[np.arange(len(axis0)), axis0])
    return st.grad_norm / denom * h * h, axis0 + 1


def _check_point(st: Stencils, y: Index) -> None:
    if not st.grad_norm[0] > 0.0:
        raise DegenerateGeometryError(f"zero discrete gradient at interface point {tuple(y)}", [tuple(y)])


def normal(g: ScalarField, y: Index, orient_outward: bool = True) -> np.ndarray:
    st = Stencils(g, [y])
    _check_point(st, y)
    return _normals(st, orient_outward)[0]


def curvature(g: ScalarField, y: Index, nu: np.ndarray | None = None, orient_outward: bool = True) -> float:
    st = Stencils(g, [y])
    _check_point(st, y)
    nu = _normals(st, orient_outward) if nu is None else np.asarray(nu, dtype=float).reshape(1, 3)
    return float(_curvature(st, nu)[0])


def area_element(g: ScalarField, y: Index) -> tuple[float, int]:
    """(dS, dominant axis), axis 1-based."""
    st = Stencils(g, [y])
    _check_point(st, y)
    ds, axis = area_elements(st, g.h)
    return float(ds[0]), int(axis[0])


def compute_payload(
    interface: InterfacePointSet,
    g: ScalarField,
    orient_outward: bool = True,
    gradient_floor: float = 0.0,
    strict: bool = False,
) -> InterfacePointSet:
    """Attach nu, m, dS and axis to every point with |D+g| above the floor.

    Points at or below the floor are dropped and listed in `degenerate`;
    strict=True raises DegenerateGeometryError instead.
    """
    if interface.is_empty:
        return interface.subset(np.zeros(0, dtype=np.int64), normals=np.zeros((0, 3)),
                                curvature=np.zeros(0), dS=np.zeros(0), axis=np.zeros(0, dtype=np.int64))
    st = Stencils(g, interface.points)
    good = st.grad_norm > gradient_floor
    bad = [tuple(int(v) for v in p) for p in interface.points[~good]]
    if bad:
        msg = f"step {interface.n}: {len(bad)} interface points with |D+g| <= {gradient_floor:g}"
        if strict:
            raise DegenerateGeometryError(msg, bad)
        logger.warning(msg + "; excluded")
    with np.errstate(divide="ignore", invalid="ignore"):
        nu = _normals(st, orient_outward)
        m = _curvature(st, nu)
        ds, axis = area_elements(st, g.h)
    return interface.subset(
        good,
        normals=nu[good],
        curvature=m[good],
        dS=ds[good],
        axis=axis[good],
        degenerate=interface.degenerate + bad,
    )


def gradients(g: ScalarField, points: np.ndarray) -> np.ndarray:
    """D+g at lattice points, shape (k, 3)."""
    return Stencils(g, points).grad
