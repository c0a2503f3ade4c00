"""Cartesian lattice hZ^3, physical domains and their discretization Omega_h."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from fdtransport.errors import ConfigError, DomainError

logger = logging.getLogger(__name__)

Index = tuple[int, int, int]

# Unit offsets of the stencil set B without the origin.
AXIS_OFFSETS: tuple[Index, ...] = ((1, 0, 0), (0, 1, 0), (0, 0, 1))


@dataclass(frozen=True)
class GridSpec:
    """Lattice window: node k sits at origin + h * k for 0 <= k < dims.

    Fields may extend beyond this base window (negative indices are allowed);
    the base window is where the discrete domain lives.
    """

    h: float
    origin: tuple[float, float, float]
    dims: tuple[int, int, int]

    def __post_init__(self):
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ConfigError(f"grid spacing must be positive, got h={self.h}")
        if len(self.dims) != 3 or any(int(n) < 4 for n in self.dims):
            raise ConfigError(f"all grid dims must be >= 4, got {self.dims}")
        object.__setattr__(self, "dims", tuple(int(n) for n in self.dims))
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))

    @property
    def upper(self) -> tuple[float, float, float]:
        """Upper corner of the bounding box, origin + h * dims."""
        return tuple(o + self.h * n for o, n in zip(self.origin, self.dims))

    @property
    def num_nodes(self) -> int:
        return int(np.prod(self.dims))

    def position(self, idx: Index) -> np.ndarray:
        return np.asarray(self.origin) + self.h * np.asarray(idx, dtype=float)

    def axis_coords(self, axis: int, lo: int, n: int) -> np.ndarray:
        """Physical coordinates of indices lo .. lo+n-1 along a 0-based axis."""
        return self.origin[axis] + self.h * np.arange(lo, lo + n, dtype=float)

    def coords(self, lo: Index = (0, 0, 0), shape: tuple[int, int, int] | None = None):
        """Meshgrid (x1, x2, x3) of the window starting at lattice index lo."""
        shape = shape or self.dims
        axes = [self.axis_coords(a, lo[a], shape[a]) for a in range(3)]
        return np.meshgrid(*axes, indexing="ij")

    def nearest_index(self, x) -> Index:
        k = np.rint((np.asarray(x, dtype=float) - np.asarray(self.origin)) / self.h)
        return tuple(int(v) for v in k)

    def cell_contains(self, idx: Index, x) -> bool:
        """True if x lies in the half-open cell C_h of node idx."""
        c = self.position(idx)
        x = np.asarray(x, dtype=float)
        return bool(np.all((x >= c - self.h / 2) & (x < c + self.h / 2)))

    @classmethod
    def covering(cls, lower, upper, h: float, margin: int = 2) -> "GridSpec":
        """Smallest lattice of spacing h containing [lower, upper] plus margin cells.

        Nodes are aligned so that the origin is an integer multiple of h, which
        keeps x = 0 on the lattice for symmetric boxes.
        """
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        k_lo = np.floor(lower / h - 1e-9).astype(int) - margin
        k_hi = np.ceil(upper / h + 1e-9).astype(int) + margin
        dims = tuple(int(v) for v in (k_hi - k_lo + 1))
        origin = tuple(float(v) for v in k_lo * h)
        return cls(h=h, origin=origin, dims=dims)


class Domain:
    """Bounded open set Omega, given as an axis-aligned box or a signed distance.

    Signed distance convention: negative inside, positive outside.
    """

    def __init__(
        self,
        lower=None,
        upper=None,
        sdf: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray] | None = None,
        bounds: tuple | None = None,
        name: str = "",
    ):
        if sdf is None and (lower is None or upper is None):
            raise ConfigError("domain needs either box bounds or a signed distance function")
        self.sdf = sdf
        if sdf is None:
            self.lower = np.asarray(lower, dtype=float)
            self.upper = np.asarray(upper, dtype=float)
            if np.any(self.upper <= self.lower):
                raise ConfigError(f"empty box domain {self.lower} .. {self.upper}")
        else:
            if bounds is None:
                raise ConfigError("signed distance domains need a bounding box")
            self.lower = np.asarray(bounds[0], dtype=float)
            self.upper = np.asarray(bounds[1], dtype=float)
        self.name = name or ("box" if sdf is None else "sdf")

    @property
    def is_box(self) -> bool:
        return self.sdf is None

    @classmethod
    def box(cls, lower, upper) -> "Domain":
        return cls(lower=lower, upper=upper)

    @classmethod
    def ball(cls, center, radius: float) -> "Domain":
        c = np.asarray(center, dtype=float)

        def sdf(x1, x2, x3):
            return np.sqrt((x1 - c[0]) ** 2 + (x2 - c[1]) ** 2 + (x3 - c[2]) ** 2) - radius

        return cls(sdf=sdf, bounds=(c - radius, c + radius), name="ball")

    def contains(self, x1, x2, x3) -> np.ndarray:
        """Pointwise membership in the open set Omega."""
        if self.is_box:
            return (
                (x1 > self.lower[0]) & (x1 < self.upper[0])
                & (x2 > self.lower[1]) & (x2 < self.upper[1])
                & (x3 > self.lower[2]) & (x3 < self.upper[2])
            )
        return self.sdf(x1, x2, x3) < 0

    def volume(self, samples: int = 64) -> float:
        if self.is_box:
            return float(np.prod(self.upper - self.lower))
        axes = [np.linspace(lo, hi, samples) for lo, hi in zip(self.lower, self.upper)]
        x = np.meshgrid(*axes, indexing="ij")
        frac = float(np.mean(self.contains(*x)))
        return frac * float(np.prod(self.upper - self.lower))


def _shift_bool(a: np.ndarray, axis: int, k: int) -> np.ndarray:
    """out[i] = a[i + k] along axis, False outside."""
    out = np.zeros_like(a)
    n = a.shape[axis]
    if abs(k) >= n:
        return out
    dst = [slice(None)] * a.ndim
    src = [slice(None)] * a.ndim
    if k > 0:
        dst[axis], src[axis] = slice(0, n - k), slice(k, n)
    else:
        dst[axis], src[axis] = slice(-k, n), slice(0, n + k)
    out[tuple(dst)] = a[tuple(src)]
    return out


def discrete_boundary(member: np.ndarray) -> np.ndarray:
    """{x in A | {x +- h e^i} not a subset of A} for a boolean set A."""
    full = member.copy()
    for axis in range(3):
        full &= _shift_bool(member, axis, 1)
        full &= _shift_bool(member, axis, -1)
    return member & ~full


@dataclass
class DomainMask:
    """Omega_h and its boundary on the base window of a GridSpec."""

    grid: GridSpec
    interior: np.ndarray  # Omega_h
    boundary: np.ndarray = field(default=None)  # dOmega_h

    def __post_init__(self):
        if self.interior.shape != self.grid.dims:
            raise DomainError(f"mask shape {self.interior.shape} does not match grid {self.grid.dims}")
        if not self.interior.any():
            raise DomainError("discrete domain Omega_h is empty; refine h or enlarge the domain")
        if self.boundary is None:
            self.boundary = discrete_boundary(self.interior)

    @property
    def inner(self) -> np.ndarray:
        """Omega_h minus its boundary."""
        return self.interior & ~self.boundary

    @property
    def num_inner(self) -> int:
        return int(self.inner.sum())

    def contains(self, idx: Index) -> bool:
        if not all(0 <= k < n for k, n in zip(idx, self.grid.dims)):
            return False
        return bool(self.interior[idx])

    def region(self, name: str = "interior") -> np.ndarray:
        if name == "interior":
            return self.interior
        if name == "boundary":
            return self.boundary
        if name == "inner":
            return self.inner
        raise ValueError(f"unknown region '{name}' (interior, boundary, inner)")

    def on(self, lo: Index, shape: tuple[int, int, int], region: str = "interior") -> np.ndarray:
        """Region as a boolean array aligned with an arbitrary window."""
        from fdtransport.grid.field import embed

        return embed(self.region(region), (0, 0, 0), lo, shape).astype(bool)

    def bounding_box(self, region: str = "interior") -> tuple[Index, Index]:
        """Inclusive lattice index bounds of a region."""
        idx = np.argwhere(self.region(region))
        return tuple(int(v) for v in idx.min(axis=0)), tuple(int(v) for v in idx.max(axis=0))

    @classmethod
    def from_domain(cls, domain: Domain, grid: GridSpec) -> "DomainMask":
        """Omega_h = {x in Omega cap hZ^3 | C_2h(x) subset of Omega}.

        Boxes are treated exactly with the half-open cube. For signed distance
        domains the cube is tested at its 8 corners and 6 face centres, exact for
        convex sets and approximate otherwise.
        """
        h = grid.h
        x1, x2, x3 = grid.coords()
        eps = 1e-9 * h
        if domain.is_box:
            inside = np.ones(grid.dims, dtype=bool)
            for a, x in enumerate((x1, x2, x3)):
                inside &= (x - h > domain.lower[a] + eps) & (x + h <= domain.upper[a] + eps)
        else:
            inside = domain.contains(x1, x2, x3)
            probes = [(s1, s2, s3) for s1 in (-1, 1) for s2 in (-1, 1) for s3 in (-1, 1)]
            probes += [(s, 0, 0) for s in (-1, 1)] + [(0, s, 0) for s in (-1, 1)] + [(0, 0, s) for s in (-1, 1)]
            for s1, s2, s3 in probes:
                inside &= domain.contains(x1 + s1 * h, x2 + s2 * h, x3 + s3 * h)
        mask = cls(grid=grid, interior=inside)
        logger.debug(
            f"Omega_h: {int(inside.sum())} nodes, boundary {int(mask.boundary.sum())}, "
            f"inner {mask.num_inner} (h={h})"
        )
        return mask

    @classmethod
    def box_mask(cls, grid: GridSpec, lo: Index, hi: Index) -> "DomainMask":
        """Omega_h given directly as an inclusive index box (used by tests and oracles)."""
        interior = np.zeros(grid.dims, dtype=bool)
        interior[lo[0]:hi[0] + 1, lo[1]:hi[1] + 1, lo[2]:hi[2] + 1] = True
        return cls(grid=grid, interior=interior)
