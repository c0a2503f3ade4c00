"""Convergence studies over a list of resolutions, and scheme comparisons."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
import pandas as pd

from fdtransport.config import RunConfig
from fdtransport.errors import PreconditionError
from fdtransport.models import Scheme
from fdtransport.reference.cascade import fit_order
from fdtransport.study.artifacts import ArtifactStore

logger = logging.getLogger(__name__)

ERROR_COLUMNS = [
    "sup_err", "l2_err", "grad_err", "hess_err",
    "hausdorff", "normal_err", "curv_err", "area_err",
]
TABLE_COLUMNS = ["scheme", "h", "tau", "steps", "quadrature_order"] + ERROR_COLUMNS


def _row(config: RunConfig, name: str) -> dict:
    """Run one resolution; errors are maxima over the measured steps."""
    from fdtransport.study.runner import run_pipeline

    result = run_pipeline(config, name)
    row = {
        "scheme": config.scheme.value,
        "h": result.problem.grid.h,
        "tau": result.problem.timegrid.tau,
        "steps": result.problem.timegrid.num_steps,
        "quadrature_order": config.quadrature.initial_order,
    }
    for frame in (result.errors, result.interfaces):
        if frame is None or not len(frame):
            continue
        for col in ERROR_COLUMNS:
            if col in frame.columns:
                row[col] = float(frame[col].max())
    return row


def _row_from_dump(dump: dict, name: str) -> dict:
    return _row(RunConfig(**dump), name)


@dataclass
class ConvergenceTable:
    table: pd.DataFrame
    orders: dict[str, float]

    def order(self, column: str) -> float:
        return self.orders[column]


def add_orders(df: pd.DataFrame) -> tuple[pd.DataFrame, dict[str, float]]:
    """Local orders between consecutive resolutions and least-squares fits over all of them."""
    df = df.sort_values("h", ascending=False).reset_index(drop=True)
    fits: dict[str, float] = {}
    hs = df["h"].to_numpy(dtype=float)
    for col in ERROR_COLUMNS:
        if col not in df.columns or df[col].isna().any():
            continue
        err = df[col].to_numpy(dtype=float)
        local = [np.nan]
        for k in range(1, len(df)):
            if err[k] > 0 and err[k - 1] > 0:
                local.append(float(np.log(err[k - 1] / err[k]) / np.log(hs[k - 1] / hs[k])))
            else:
                local.append(np.inf)
        df[f"{col}_order"] = local
        fits[col] = fit_order(hs, err)
    return df, fits


def convergence_study(
    template: RunConfig,
    resolutions: list[float],
    processes: int = 1,
    name: str | None = None,
) -> ConvergenceTable:
    """Run the template at each h and write convergence.csv with fitted orders.

    resolutions are grid spacings h. With processes > 1 the runs execute in
    separate processes; the table does not depend on the process count.
    """
    if len(resolutions) < 2:
        raise PreconditionError("a convergence study needs at least two resolutions")
    if len(set(resolutions)) != len(resolutions):
        raise PreconditionError(f"duplicate resolutions {resolutions}")
    name = name or f"{template.output.name}_study"
    configs = [template.with_resolution(float(h)) for h in resolutions]
    names = [f"{name}/h{k}" for k in range(len(configs))]
    logger.info(f"convergence study '{name}': {template.scheme.value} at h = {list(resolutions)}")

    if processes > 1:
        with ProcessPoolExecutor(max_workers=processes) as pool:
            rows = list(pool.map(_row_from_dump, [c.model_dump(mode="json") for c in configs], names))
    else:
        rows = [_row(c, nm) for c, nm in zip(configs, names)]

    df = pd.DataFrame(rows)
    df = df.reindex(columns=[c for c in TABLE_COLUMNS if c in df.columns])
    df, fits = add_orders(df)

    store = ArtifactStore(template.output.directory, name, template.scheme.value)
    store.write_frame("convergence.csv", df, "convergence")
    orders = pd.DataFrame([{"error": k, "order": v} for k, v in fits.items()])
    store.write_frame("orders.csv", orders, "convergence")
    store.write_manifest(exit_code=0, resolutions=[float(h) for h in resolutions],
                         runs=names, orders=fits)
    return ConvergenceTable(df, fits)


def compare_schemes(
    template: RunConfig,
    resolutions: list[float],
    processes: int = 1,
    name: str | None = None,
) -> pd.DataFrame:
    """Explicit and implicit studies of the same problem side by side."""
    name = name or f"{template.output.name}_compare"
    frames = []
    for scheme in (Scheme.EXPLICIT, Scheme.IMPLICIT):
        cfg = template.model_copy(update={"scheme": scheme}, deep=True)
        study = convergence_study(cfg, resolutions, processes, name=f"{name}/{scheme.value}")
        frames.append(study.table)
    df = pd.concat(frames, ignore_index=True)
    store = ArtifactStore(template.output.directory, name)
    store.write_frame("comparison.csv", df, "convergence")
    store.write_manifest(exit_code=0, resolutions=[float(h) for h in resolutions])
    return df
