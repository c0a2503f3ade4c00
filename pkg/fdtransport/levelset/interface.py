"""Discrete interface of a super-level set.

Omega+ = {x in Omega_h : g(x) > c}, its dilation by B is
{x + h w : x in Omega+, w in B}, and the interface is the discrete boundary of
the dilation: nodes with g <= c that have a neighbour in Omega+.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd

from fdtransport.grid.export import FLOAT_FORMAT, write_vtk_points
from fdtransport.grid.field import ScalarField, shift
from fdtransport.grid.lattice import DomainMask, GridSpec, discrete_boundary

logger = logging.getLogger(__name__)

INTERFACE_COLUMNS = ["n", "t", "x", "y", "z", "nx", "ny", "nz", "m", "dS", "axis", "refined"]


@dataclass
class InterfacePointSet:
    """Lattice points of an interface with optional geometric payload.

    points holds lattice indices (k, 3). Payload arrays are aligned with
    points; axis is 1-based (the dominant gradient axis used for dS).
    """

    grid: GridSpec
    level: float
    points: np.ndarray
    n: int = 0
    t: float = 0.0
    refined: bool = False
    normals: np.ndarray | None = None
    curvature: np.ndarray | None = None
    dS: np.ndarray | None = None
    axis: np.ndarray | None = None
    degenerate: list[tuple[int, int, int]] = field(default_factory=list)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.int64).reshape(-1, 3)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def is_empty(self) -> bool:
        return len(self.points) == 0

    @property
    def has_payload(self) -> bool:
        return self.normals is not None

    def positions(self) -> np.ndarray:
        return np.asarray(self.grid.origin) + self.grid.h * self.points

    def index_set(self) -> set[tuple[int, int, int]]:
        return {tuple(int(v) for v in p) for p in self.points}

    def subset(self, keep: np.ndarray, **changes) -> "InterfacePointSet":
        """Points selected by a boolean or integer index, payload included."""
        attrs = {"points": self.points[keep]}
        for name in ("normals", "curvature", "dS", "axis"):
            a = getattr(self, name)
            attrs[name] = None if a is None else a[keep]
        attrs.update(changes)
        return replace(self, **attrs)

    def to_frame(self) -> pd.DataFrame:
        pos = self.positions()
        k = len(self)
        nan = np.full(k, np.nan)
        nrm = self.normals if self.normals is not None else np.full((k, 3), np.nan)
        return pd.DataFrame({
            "n": np.full(k, self.n, dtype=np.int64),
            "t": np.full(k, self.t),
            "x": pos[:, 0],
            "y": pos[:, 1],
            "z": pos[:, 2],
            "nx": nrm[:, 0],
            "ny": nrm[:, 1],
            "nz": nrm[:, 2],
            "m": self.curvature if self.curvature is not None else nan,
            "dS": self.dS if self.dS is not None else nan,
            "axis": self.axis if self.axis is not None else np.zeros(k, dtype=np.int64),
            "refined": np.full(k, int(self.refined), dtype=np.int64),
        }, columns=INTERFACE_COLUMNS)

    def write_csv(self, path: str | Path) -> Path:
        path = Path(path)
        self.to_frame().to_csv(path, index=False, float_format=FLOAT_FORMAT)
        return path

    def write_vtk(self, path: str | Path) -> Path:
        data = {}
        if self.has_payload:
            data = {"normal": self.normals, "curvature": self.curvature, "dS": self.dS}
        return write_vtk_points(path, self.positions(), data, title=f"interface n={self.n} level={self.level:g}")


def super_level(g: ScalarField, c: float, mask: DomainMask | None = None) -> np.ndarray:
    """{x : g(x) > c}, intersected with Omega_h when a mask is given; aligned with g."""
    plus = g.values > c
    if mask is not None:
        plus &= mask.on(g.lo, g.shape, "interior")
    return plus


def dilate(member: np.ndarray) -> np.ndarray:
    """Union of member + h w over w in B."""
    out = member.copy()
    for axis in range(3):
        out |= shift(member, axis, 1) | shift(member, axis, -1)
    return out


def extract_interface(
    g: ScalarField,
    c: float = 1.0,
    mask: DomainMask | None = None,
    n: int = 0,
    t: float = 0.0,
) -> InterfacePointSet:
    """Discrete boundary of the dilated super-level set; empty when nothing exceeds c."""
    gp = g.padded(2)
    plus = super_level(gp, c, mask)
    if not plus.any():
        logger.debug(f"step {n}: no node above level {c}; interface is empty")
        return InterfacePointSet(g.grid, c, np.zeros((0, 3), dtype=np.int64), n=n, t=t)
    boundary = discrete_boundary(dilate(plus))
    points = np.argwhere(boundary) + np.asarray(gp.lo)
    return InterfacePointSet(g.grid, c, points, n=n, t=t)


@dataclass
class ConnectivityReport:
    """Points of the later interface whose neighbourhood misses the earlier one."""

    missing: np.ndarray
    checked: int

    @property
    def ok(self) -> bool:
        return len(self.missing) == 0


def check_connectivity(previous: InterfacePointSet, current: InterfacePointSet) -> ConnectivityReport:
    """Every y in `current` must have y + h w in `previous` for some w in B."""
    prev = previous.index_set()
    offsets = [(0, 0, 0)] + [
        tuple(s if a == j else 0 for a in range(3)) for j in range(3) for s in (-1, 1)
    ]
    missing = []
    for p in current.points:
        y = tuple(int(v) for v in p)
        if not any((y[0] + o[0], y[1] + o[1], y[2] + o[2]) in prev for o in offsets):
            missing.append(y)
    report = ConnectivityReport(np.asarray(missing, dtype=np.int64).reshape(-1, 3), len(current))
    if not report.ok:
        logger.warning(
            f"interfaces at steps {previous.n} and {current.n} not connected at {len(missing)} points"
        )
    return report
