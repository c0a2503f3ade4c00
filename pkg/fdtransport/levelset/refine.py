"""Refinement of the interface to single-valued patches, and surface integrals.

Interface points are covered by axis-aligned patches. Inside a patch with
dominant axis i, points are grouped by their two remaining coordinates and
only the one with the smallest i-th coordinate is kept, so the refined set
is a height function over the plane orthogonal to e^i.
"""

from __future__ import annotations

import logging
import math
from typing import TYPE_CHECKING, Callable

import numpy as np

from fdtransport.errors import ConfigError, DegenerateGeometryError
from fdtransport.grid.field import ScalarField
from fdtransport.levelset.geometry import Stencils, area_elements, compute_payload
from fdtransport.levelset.interface import InterfacePointSet

if TYPE_CHECKING:
    from fdtransport.reference.oracle import SurfaceOracle

logger = logging.getLogger(__name__)

STRATEGIES = ("greedy", "axis")
DOMINANCE_EPS = 1e-12


def _lowest_per_column(pts: np.ndarray, members: np.ndarray, axis0: int) -> np.ndarray:
    """Indices (into pts) of the lowest member along axis0 for each transverse column."""
    others = [a for a in range(3) if a != axis0]
    best: dict[tuple[int, int], int] = {}
    for k in members:
        key = (int(pts[k, others[0]]), int(pts[k, others[1]]))
        cur = best.get(key)
        if cur is None or pts[k, axis0] < pts[cur, axis0]:
            best[key] = int(k)
    return np.fromiter(best.values(), dtype=np.int64, count=len(best))


def _eligible(grad: np.ndarray, axis0: int, sign: float) -> np.ndarray:
    gi = grad[:, axis0]
    norm = np.linalg.norm(grad, axis=1)
    return (np.abs(gi) > DOMINANCE_EPS * norm) & (np.sign(gi) == sign)


def _greedy_patches(pts: np.ndarray, grad: np.ndarray, patch_size: int, aspect: float):
    """Yield (retained indices, axis0) per patch, seeding from the nearest unvisited point."""
    k = len(pts)
    unvisited = np.ones(k, dtype=bool)
    half_i = max(1, int(math.ceil(aspect * patch_size)))
    seed = 0
    while unvisited.any():
        y = pts[seed]
        axis0 = int(np.argmax(np.abs(grad[seed])))
        sign = float(np.sign(grad[seed, axis0]))
        d = np.abs(pts - y)
        in_box = np.ones(k, dtype=bool)
        for a in range(3):
            in_box &= d[:, a] <= (half_i if a == axis0 else patch_size)
        members = np.flatnonzero(in_box & unvisited & _eligible(grad, axis0, sign))
        if seed not in members:
            members = np.append(members, seed)
        unvisited[members] = False
        yield _lowest_per_column(pts, members, axis0), axis0
        if not unvisited.any():
            break
        rest = np.flatnonzero(unvisited)
        dist = np.sum((pts[rest] - y) ** 2, axis=1)
        seed = int(rest[int(np.argmin(dist))])


def _axis_patches(pts: np.ndarray, grad: np.ndarray):
    """One patch per (dominant axis, gradient sign): six hemispherical pieces for a sphere."""
    dominant = np.argmax(np.abs(grad), axis=1)
    signs = np.sign(grad[np.arange(len(pts)), dominant])
    for axis0 in range(3):
        for sign in (-1.0, 1.0):
            members = np.flatnonzero((dominant == axis0) & (signs == sign))
            if len(members):
                yield _lowest_per_column(pts, members, axis0), axis0


def refine_interface(
    interface: InterfacePointSet,
    g: ScalarField,
    patch_size: int = 8,
    aspect: float = 1.0,
    strategy: str = "greedy",
    gradient_floor: float = 0.0,
    orient_outward: bool = True,
) -> InterfacePointSet:
    """Refined interface; dS of a kept point uses its patch's axis.

    patch_size is the transverse half-width in cells, aspect scales the
    half-width along the dominant axis.
    """
    if strategy not in STRATEGIES:
        raise ConfigError(f"unknown refinement strategy '{strategy}' (choose from {STRATEGIES})")
    if patch_size < 1 or not aspect > 0:
        raise ConfigError(f"patch size must be >= 1 and aspect > 0 (got {patch_size}, {aspect})")
    if not interface.has_payload:
        interface = compute_payload(interface, g, orient_outward, gradient_floor)
    if interface.is_empty:
        return interface.subset(np.zeros(0, dtype=np.int64), refined=True)

    st = Stencils(g, interface.points)
    low = st.grad_norm <= gradient_floor
    if low.any():
        bad = [tuple(int(v) for v in p) for p in interface.points[low]]
        raise DegenerateGeometryError(
            f"step {interface.n}: {len(bad)} interface points violate the gradient floor {gradient_floor:g}", bad
        )
    pts = interface.points
    if strategy == "greedy":
        patches = _greedy_patches(pts, st.grad, patch_size, aspect)
    else:
        patches = _axis_patches(pts, st.grad)

    keep_idx, keep_axis = [], []
    count = 0
    for idx, axis0 in patches:
        keep_idx.append(idx)
        keep_axis.append(np.full(len(idx), axis0 + 1, dtype=np.int64))
        count += 1
    order = np.concatenate(keep_idx)
    axes = np.concatenate(keep_axis)
    sub = Stencils(g, pts[order])
    ds, axes = area_elements(sub, g.h, axis=axes)
    logger.debug(f"step {interface.n}: refined {len(pts)} -> {len(order)} points in {count} patches ({strategy})")
    return interface.subset(order, refined=True, dS=ds, axis=axes)


def surface_integral(interface: InterfacePointSet, phi: Callable) -> float:
    """sum_y phi(y) dS(y) over the (refined) interface."""
    if interface.is_empty:
        return 0.0
    if interface.dS is None:
        raise ConfigError("surface integrals need an interface with area elements (compute_payload)")
    x = interface.positions()
    values = np.broadcast_to(np.asarray(phi(x[:, 0], x[:, 1], x[:, 2]), dtype=float), (len(x),))
    return float(np.sum(values * interface.dS))


def surface_integral_error(
    interface: InterfacePointSet,
    phi: Callable,
    oracle: "SurfaceOracle",
    t: float,
) -> float:
    """sum_y phi(t_n, y) dS^n(y) - integral over Gamma(t) of phi(t, x) dS.

    phi takes (t, x1, x2, x3); t may lie anywhere in [t_n, t_{n+1}).
    """
    tn = interface.t
    discrete = surface_integral(interface, lambda x1, x2, x3: phi(tn, x1, x2, x3))
    exact = oracle.surface_integral(lambda x1, x2, x3: phi(t, x1, x2, x3), t)
    return discrete - exact
