"""Grid functions stored on a dense box window with implicit zero extension."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from fdtransport.grid.lattice import GridSpec, Index

Shape = tuple[int, int, int]


def embed(values: np.ndarray, src_lo: Index, dst_lo: Index, dst_shape: Shape) -> np.ndarray:
    """Copy `values` (anchored at src_lo) into a zero array anchored at dst_lo.

    Nodes of the destination not covered by the source read 0; source nodes
    outside the destination are dropped.
    """
    out = np.zeros(dst_shape, dtype=values.dtype)
    dst, src = [], []
    for a in range(3):
        lo = max(src_lo[a], dst_lo[a])
        hi = min(src_lo[a] + values.shape[a], dst_lo[a] + dst_shape[a])
        if hi <= lo:
            return out
        dst.append(slice(lo - dst_lo[a], hi - dst_lo[a]))
        src.append(slice(lo - src_lo[a], hi - src_lo[a]))
    out[tuple(dst)] = values[tuple(src)]
    return out


def shift(values: np.ndarray, axis: int, k: int) -> np.ndarray:
    """out[x] = values[x + k e^axis] on the same window, reading 0 past its edge."""
    out = np.zeros_like(values)
    n = values.shape[axis]
    if k == 0:
        return values.copy()
    if abs(k) >= n:
        return out
    dst = [slice(None)] * 3
    src = [slice(None)] * 3
    if k > 0:
        dst[axis], src[axis] = slice(0, n - k), slice(k, n)
    else:
        dst[axis], src[axis] = slice(-k, n), slice(0, n + k)
    out[tuple(dst)] = values[tuple(src)]
    return out


@dataclass(frozen=True)
class ScalarField:
    """Real values on lattice indices lo .. lo + shape - 1, zero everywhere else.

    An optional boolean mask (aligned with values) restricts the support further;
    values off the mask are zeroed at construction.
    """

    grid: GridSpec
    values: np.ndarray
    lo: Index = (0, 0, 0)
    mask: np.ndarray | None = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 3:
            raise ValueError(f"field values must be 3-dimensional, got shape {vals.shape}")
        if self.mask is not None:
            if self.mask.shape != vals.shape:
                raise ValueError("field mask must match the values window")
            vals = np.where(self.mask, vals, 0.0)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "lo", tuple(int(v) for v in self.lo))

    @property
    def shape(self) -> Shape:
        return self.values.shape

    @property
    def hi(self) -> Index:
        """Exclusive upper index of the window."""
        return tuple(l + n for l, n in zip(self.lo, self.shape))

    @property
    def h(self) -> float:
        return self.grid.h

    def at(self, idx: Index) -> float:
        """Value at a lattice index; exactly 0 outside the window."""
        k = tuple(i - l for i, l in zip(idx, self.lo))
        if any(v < 0 or v >= n for v, n in zip(k, self.shape)):
            return 0.0
        return float(self.values[k])

    def coords(self):
        return self.grid.coords(self.lo, self.shape)

    def window(self, lo: Index, shape: Shape) -> "ScalarField":
        """Same function stored on another window (zero-filled, or clipped)."""
        return ScalarField(self.grid, embed(self.values, self.lo, lo, shape), lo)

    def padded(self, n: int = 1) -> "ScalarField":
        lo = tuple(l - n for l in self.lo)
        shape = tuple(s + 2 * n for s in self.shape)
        return self.window(lo, shape)

    def on_base(self) -> "ScalarField":
        """Restriction / extension to the grid's base window."""
        return self.window((0, 0, 0), self.grid.dims)

    def with_values(self, values: np.ndarray) -> "ScalarField":
        return ScalarField(self.grid, values, self.lo)

    def restricted(self, member: np.ndarray) -> "ScalarField":
        """Zero outside a boolean array aligned with this window."""
        return ScalarField(self.grid, np.where(member, self.values, 0.0), self.lo)

    def _aligned(self, other: "ScalarField") -> tuple[np.ndarray, np.ndarray, Index, Shape]:
        if other.lo == self.lo and other.shape == self.shape:
            return self.values, other.values, self.lo, self.shape
        lo = tuple(min(a, b) for a, b in zip(self.lo, other.lo))
        hi = tuple(max(a, b) for a, b in zip(self.hi, other.hi))
        shape = tuple(b - a for a, b in zip(lo, hi))
        return (
            embed(self.values, self.lo, lo, shape),
            embed(other.values, other.lo, lo, shape),
            lo,
            shape,
        )

    def __add__(self, other):
        if isinstance(other, ScalarField):
            a, b, lo, _ = self._aligned(other)
            return ScalarField(self.grid, a + b, lo)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, ScalarField):
            a, b, lo, _ = self._aligned(other)
            return ScalarField(self.grid, a - b, lo)
        return NotImplemented

    def __mul__(self, scalar):
        if isinstance(scalar, (int, float, np.floating)):
            return ScalarField(self.grid, self.values * float(scalar), self.lo)
        return NotImplemented

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(self.grid, -self.values, self.lo)

    @classmethod
    def zeros(cls, grid: GridSpec, lo: Index = (0, 0, 0), shape: Shape | None = None) -> "ScalarField":
        return cls(grid, np.zeros(shape or grid.dims), lo)

    @classmethod
    def from_function(
        cls,
        grid: GridSpec,
        fn: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray],
        lo: Index = (0, 0, 0),
        shape: Shape | None = None,
        mask: np.ndarray | None = None,
    ) -> "ScalarField":
        """Point samples fn(x1, x2, x3) at the lattice nodes of a window."""
        shape = shape or grid.dims
        x1, x2, x3 = grid.coords(lo, shape)
        values = np.broadcast_to(np.asarray(fn(x1, x2, x3), dtype=float), shape).copy()
        return cls(grid, values, lo, mask)


@dataclass(frozen=True)
class VectorField:
    """Three scalar components (u1, u2, u3) on a common window."""

    components: tuple[ScalarField, ScalarField, ScalarField]

    def __post_init__(self):
        if len(self.components) != 3:
            raise ValueError("a vector field has exactly three components")
        c0 = self.components[0]
        for c in self.components[1:]:
            if c.lo != c0.lo or c.shape != c0.shape or c.grid != c0.grid:
                raise ValueError("vector field components must share window and spacing")

    @property
    def grid(self) -> GridSpec:
        return self.components[0].grid

    @property
    def lo(self) -> Index:
        return self.components[0].lo

    @property
    def shape(self) -> Shape:
        return self.components[0].shape

    def __getitem__(self, j: int) -> ScalarField:
        """0-based component access."""
        return self.components[j]

    def __iter__(self):
        return iter(self.components)

    def stacked(self) -> np.ndarray:
        """Array of shape (3, n1, n2, n3)."""
        return np.stack([c.values for c in self.components])

    def magnitude(self) -> np.ndarray:
        return np.sqrt(sum(c.values ** 2 for c in self.components))

    def window(self, lo: Index, shape: Shape) -> "VectorField":
        return VectorField(tuple(c.window(lo, shape) for c in self.components))

    def restricted(self, member: np.ndarray) -> "VectorField":
        return VectorField(tuple(c.restricted(member) for c in self.components))

    def __add__(self, other: "VectorField") -> "VectorField":
        return VectorField(tuple(a + b for a, b in zip(self.components, other.components)))

    def __sub__(self, other: "VectorField") -> "VectorField":
        return VectorField(tuple(a - b for a, b in zip(self.components, other.components)))

    def __mul__(self, scalar) -> "VectorField":
        return VectorField(tuple(c * scalar for c in self.components))

    __rmul__ = __mul__

    @classmethod
    def from_arrays(cls, grid: GridSpec, arrays, lo: Index = (0, 0, 0)) -> "VectorField":
        return cls(tuple(ScalarField(grid, a, lo) for a in arrays))

    @classmethod
    def zeros(cls, grid: GridSpec, lo: Index = (0, 0, 0), shape: Shape | None = None) -> "VectorField":
        shape = shape or grid.dims
        return cls.from_arrays(grid, [np.zeros(shape) for _ in range(3)], lo)
