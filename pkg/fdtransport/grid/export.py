"""Field and point-cloud serialization: legacy ASCII VTK and CSV.

CSV column order for fields: i, j, k, x, y, z, value (one row per node, i
slowest). VTK STRUCTURED_POINTS writes point data with x fastest, as the
format requires.
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import pandas as pd

from fdtransport.grid.field import ScalarField, VectorField
from fdtransport.grid.lattice import GridSpec

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
FIELD_COLUMNS = ["i", "j", "k", "x", "y", "z", "value"]


def _fmt(v: float) -> str:
    return FLOAT_FORMAT % v


def _header(lines: list[str], title: str, dataset: str) -> None:
    lines.append("# vtk DataFile Version 2.0")
    lines.append(title.replace("\n", " ")[:255] or "fdtransport")
    lines.append("ASCII")
    lines.append(f"DATASET {dataset}")


def write_vtk_structured(
    path: str | Path,
    scalars: dict[str, ScalarField] | None = None,
    vectors: dict[str, VectorField] | None = None,
    title: str = "fdtransport field",
) -> Path:
    """Write fields sharing one window as a STRUCTURED_POINTS dataset."""
    scalars = scalars or {}
    vectors = vectors or {}
    ref = next(iter(scalars.values()), None)
    if ref is None:
        ref = next(iter(vectors.values()))[0]
    lo, shape, grid = ref.lo, ref.shape, ref.grid
    origin = grid.position(lo)

    lines: list[str] = []
    _header(lines, title, "STRUCTURED_POINTS")
    lines.append(f"DIMENSIONS {shape[0]} {shape[1]} {shape[2]}")
    lines.append("ORIGIN " + " ".join(_fmt(v) for v in origin))
    lines.append("SPACING " + " ".join(_fmt(grid.h) for _ in range(3)))
    lines.append(f"POINT_DATA {int(np.prod(shape))}")
    for name, f in scalars.items():
        vals = f.window(lo, shape).values
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines.extend(_fmt(v) for v in vals.ravel(order="F"))
    for name, u in vectors.items():
        u = u.window(lo, shape)
        cols = [c.values.ravel(order="F") for c in u]
        lines.append(f"VECTORS {name} double")
        lines.extend(f"{_fmt(a)} {_fmt(b)} {_fmt(c)}" for a, b, c in zip(*cols))

    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    logger.debug(f"wrote VTK structured points {path} ({shape})")
    return path


def write_vtk_points(
    path: str | Path,
    points: np.ndarray,
    point_data: dict[str, np.ndarray] | None = None,
    title: str = "fdtransport points",
) -> Path:
    """Write a point cloud as POLYDATA with one VERTEX cell per point.

    point_data values of shape (n,) become SCALARS, shape (n, 3) VECTORS.
    """
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    n = len(points)
    lines: list[str] = []
    _header(lines, title, "POLYDATA")
    lines.append(f"POINTS {n} double")
    lines.extend(" ".join(_fmt(v) for v in p) for p in points)
    lines.append(f"VERTICES {n} {2 * n}")
    lines.extend(f"1 {i}" for i in range(n))
    if point_data:
        lines.append(f"POINT_DATA {n}")
        for name, data in point_data.items():
            data = np.asarray(data, dtype=float)
            if data.ndim == 2:
                lines.append(f"VECTORS {name} double")
                lines.extend(" ".join(_fmt(v) for v in row) for row in data)
            else:
                lines.append(f"SCALARS {name} double 1")
                lines.append("LOOKUP_TABLE default")
                lines.extend(_fmt(v) for v in data)
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    logger.debug(f"wrote VTK point cloud {path} ({n} points)")
    return path


def field_to_frame(f: ScalarField, member: np.ndarray | None = None) -> pd.DataFrame:
    """One row per node of the window (or of `member`, aligned with it)."""
    idx = np.indices(f.shape).reshape(3, -1).T + np.asarray(f.lo)
    vals = f.values.ravel()
    if member is not None:
        keep = np.asarray(member, dtype=bool).ravel()
        idx, vals = idx[keep], vals[keep]
    pos = np.asarray(f.grid.origin) + f.grid.h * idx
    return pd.DataFrame({
        "i": idx[:, 0], "j": idx[:, 1], "k": idx[:, 2],
        "x": pos[:, 0], "y": pos[:, 1], "z": pos[:, 2],
        "value": vals,
    })


def write_field_csv(path: str | Path, f: ScalarField, member: np.ndarray | None = None) -> Path:
    path = Path(path)
    field_to_frame(f, member).to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def read_field_csv(path: str | Path, grid: GridSpec) -> ScalarField:
    """Inverse of write_field_csv; nodes missing from the file read 0."""
    df = pd.read_csv(path, float_precision="round_trip")
    missing = [c for c in ("i", "j", "k", "value") if c not in df.columns]
    if missing:
        raise ValueError(f"{path}: missing columns {missing}")
    idx = df[["i", "j", "k"]].to_numpy(dtype=int)
    lo = tuple(int(v) for v in idx.min(axis=0))
    shape = tuple(int(v) for v in idx.max(axis=0) - np.asarray(lo) + 1)
    values = np.zeros(shape)
    rel = idx - np.asarray(lo)
    values[rel[:, 0], rel[:, 1], rel[:, 2]] = df["value"].to_numpy(dtype=float)
    return ScalarField(grid, values, lo)
