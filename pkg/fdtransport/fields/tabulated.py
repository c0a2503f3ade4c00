"""Velocity given as a table on a regular space-time grid.

File layout (CSV):

    # origin=-1,-1,-1 spacing=0.125 dims=17,17,17
    t,i,j,k,v1,v2,v3
    0,0,0,0,0,0,0
    ...

Node (i, j, k) sits at origin + spacing * (i, j, k). Every node must appear
once per time level. The sampler interpolates trilinearly in space and
linearly in time, reads 0 outside the table's box and holds the first and
last time levels constant outside the tabulated time range.
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.interpolate import RegularGridInterpolator

from fdtransport.errors import DataError
from fdtransport.fields.averaging import SampledData, VelocitySampler
from fdtransport.grid.export import FLOAT_FORMAT

logger = logging.getLogger(__name__)

COLUMNS = ["t", "i", "j", "k", "v1", "v2", "v3"]
_KEYS = ("origin", "spacing", "dims")


def parse_header(line: str) -> dict:
    """Parse the '# key=value ...' metadata line."""
    if not line.startswith("#"):
        raise DataError("tabulated velocity: first line must be a '# origin=... spacing=... dims=...' header")
    meta: dict = {}
    for token in line[1:].split():
        if "=" not in token:
            raise DataError(f"tabulated velocity: malformed header token '{token}'")
        key, value = token.split("=", 1)
        meta[key.strip()] = value.strip()
    missing = [k for k in _KEYS if k not in meta]
    if missing:
        raise DataError(f"tabulated velocity: header misses {missing}")
    try:
        origin = tuple(float(v) for v in meta["origin"].split(","))
        spacing = float(meta["spacing"])
        dims = tuple(int(v) for v in meta["dims"].split(","))
    except ValueError as e:
        raise DataError(f"tabulated velocity: bad header value ({e})") from e
    if len(origin) != 3 or len(dims) != 3:
        raise DataError("tabulated velocity: origin and dims need three components")
    if not spacing > 0 or min(dims) < 2:
        raise DataError(f"tabulated velocity: need spacing > 0 and dims >= 2, got {spacing}, {dims}")
    return {"origin": origin, "spacing": spacing, "dims": dims}


class TabulatedVelocity:
    """Interpolating view of a velocity table; use .sampler() to get a VelocitySampler."""

    def __init__(self, origin, spacing: float, dims, times, values: np.ndarray):
        self.origin = tuple(float(v) for v in origin)
        self.spacing = float(spacing)
        self.dims = tuple(int(n) for n in dims)
        self.times = np.asarray(times, dtype=float)
        self.values = np.asarray(values, dtype=float)
        expected = (len(self.times),) + self.dims + (3,)
        if self.values.shape != expected:
            raise DataError(f"tabulated velocity: values of shape {self.values.shape}, expected {expected}")
        if not np.all(np.isfinite(self.values)):
            raise DataError("tabulated velocity contains non-finite values")
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0):
            raise DataError("tabulated velocity: time levels must be strictly increasing")
        self.axes = tuple(self.origin[a] + self.spacing * np.arange(self.dims[a]) for a in range(3))
        if len(self.times) > 1:
            self._interp = RegularGridInterpolator(
                (self.times,) + self.axes, self.values, method="linear", bounds_error=False, fill_value=0.0
            )
        else:
            self._interp = RegularGridInterpolator(
                self.axes, self.values[0], method="linear", bounds_error=False, fill_value=0.0
            )

    @property
    def steady(self) -> bool:
        return len(self.times) == 1

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.origin)

    @property
    def upper(self) -> np.ndarray:
        return np.asarray(self.origin) + self.spacing * (np.asarray(self.dims) - 1)

    def __call__(self, t: float, x1, x2, x3) -> np.ndarray:
        x1, x2, x3 = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float), np.asarray(x3, float))
        pts = np.stack([x1.ravel(), x2.ravel(), x3.ravel()], axis=-1)
        if self.steady:
            out = self._interp(pts)
        else:
            tc = float(np.clip(t, self.times[0], self.times[-1]))
            out = self._interp(np.column_stack([np.full(len(pts), tc), pts]))
        return out.T.reshape((3,) + x1.shape)

    def sampler(self, name: str = "tabulated", divergence_free: bool = True) -> VelocitySampler:
        return VelocitySampler(
            fn=self,
            divergence_free=divergence_free,
            steady=self.steady,
            smooth=False,
            name=name,
        )


def read_tabulated_velocity(path: str | Path) -> TabulatedVelocity:
    path = Path(path)
    if not path.exists():
        raise DataError(f"tabulated velocity file not found: {path}")
    with open(path, encoding="utf-8") as f:
        meta = parse_header(f.readline().strip())
    try:
        df = pd.read_csv(path, skiprows=1, float_precision="round_trip")
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DataError(f"{path}: {e}") from e
    missing = [c for c in COLUMNS if c not in df.columns]
    if missing:
        raise DataError(f"{path}: missing columns {missing}")

    dims = meta["dims"]
    times = np.unique(df["t"].to_numpy(dtype=float))
    idx = df[["i", "j", "k"]].to_numpy()
    if np.any(idx < 0) or np.any(idx >= np.asarray(dims)):
        raise DataError(f"{path}: node indices outside dims {dims}")
    n_nodes = int(np.prod(dims))
    if len(df) != len(times) * n_nodes:
        raise DataError(f"{path}: {len(df)} rows, expected {len(times)} time levels x {n_nodes} nodes")
    ti = np.searchsorted(times, df["t"].to_numpy(dtype=float))
    flat = np.ravel_multi_index((ti, idx[:, 0], idx[:, 1], idx[:, 2]), (len(times),) + dims)
    if len(np.unique(flat)) != len(flat):
        raise DataError(f"{path}: duplicate (t, i, j, k) rows")
    values = np.empty((len(times),) + dims + (3,))
    values.reshape(-1, 3)[flat] = df[["v1", "v2", "v3"]].to_numpy(dtype=float)
    table = TabulatedVelocity(meta["origin"], meta["spacing"], dims, times, values)
    logger.info(f"loaded tabulated velocity {path.name}: dims={dims} time levels={len(times)}")
    return table


def write_tabulated_velocity(path: str | Path, v: VelocitySampler, origin, spacing: float, dims, times) -> Path:
    """Sample v on a regular grid and write it in the tabulated format."""
    path = Path(path)
    dims = tuple(int(n) for n in dims)
    axes = [origin[a] + spacing * np.arange(dims[a]) for a in range(3)]
    x1, x2, x3 = np.meshgrid(*axes, indexing="ij")
    ii = np.indices(dims).reshape(3, -1)
    frames = []
    for t in times:
        vals = v(float(t), x1, x2, x3).reshape(3, -1)
        frames.append(pd.DataFrame({
            "t": np.full(ii.shape[1], float(t)),
            "i": ii[0], "j": ii[1], "k": ii[2],
            "v1": vals[0], "v2": vals[1], "v3": vals[2],
        }, columns=COLUMNS))
    header = (
        "# origin=" + ",".join(FLOAT_FORMAT % o for o in origin)
        + f" spacing={FLOAT_FORMAT % spacing} dims=" + ",".join(str(n) for n in dims)
    )
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(header + "\n")
        pd.concat(frames, ignore_index=True).to_csv(f, index=False, float_format=FLOAT_FORMAT)
    return path


def read_sampled_initial(path: str | Path) -> SampledData:
    """Initial data from a field CSV (columns x, y, z, value) covering a full regular grid."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"initial data file not found: {path}")
    df = pd.read_csv(path, float_precision="round_trip")
    missing = [c for c in ("x", "y", "z", "value") if c not in df.columns]
    if missing:
        raise DataError(f"{path}: missing columns {missing}")
    axes = tuple(np.unique(df[c].to_numpy(dtype=float)) for c in ("x", "y", "z"))
    shape = tuple(len(a) for a in axes)
    if len(df) != int(np.prod(shape)) or min(shape) < 2:
        raise DataError(f"{path}: {len(df)} rows do not fill a regular {shape} grid")
    pos = [np.searchsorted(axes[a], df[c].to_numpy(dtype=float)) for a, c in enumerate(("x", "y", "z"))]
    values = np.full(shape, np.nan)
    values[pos[0], pos[1], pos[2]] = df["value"].to_numpy(dtype=float)
    return SampledData(axes, values)
