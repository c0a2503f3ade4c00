"""End-to-end pipeline for one RunConfig.

fields -> scheme -> (optional) level set -> (optional) oracle comparison,
with every emitted file listed in the run's manifest.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from fdtransport.config import RunConfig
from fdtransport.errors import ConfigError, TransportError, exit_code_for
from fdtransport.fields.averaging import SampledData, ScalarFn, VelocitySampler
from fdtransport.fields.tabulated import read_sampled_initial, read_tabulated_velocity
from fdtransport.fields.timegrid import SchemeParams, TimeGrid
from fdtransport.fields.truncation import velocity_norms
from fdtransport.grid.export import write_field_csv, write_vtk_structured
from fdtransport.grid.field import ScalarField
from fdtransport.grid.lattice import Domain, DomainMask, GridSpec
from fdtransport.grid.operators import lp_norm
from fdtransport.levelset.geometry import compute_payload
from fdtransport.levelset.interface import InterfacePointSet, check_connectivity, extract_interface
from fdtransport.levelset.refine import refine_interface, surface_integral
from fdtransport.models import Scheme, StepDiagnostics
from fdtransport.presets.base import ExactFlow, InitialPreset
from fdtransport.presets.registry import get_initial_preset, get_velocity_preset
from fdtransport.reference.cascade import CascadeRecorder
from fdtransport.reference.flow import FlowMap
from fdtransport.reference.oracle import ExactSolution, SurfaceOracle, geometry_errors
from fdtransport.schemes.linsolve import SolverSettings
from fdtransport.study.artifacts import ArtifactStore

logger = logging.getLogger(__name__)

# smooth mode: the sampled sup of |v_j| is inflated before choosing tau, since
# cell averages are bounded by the true sup, not by the sampled one
VMAX_SAFETY = 1.05


@dataclass
class Problem:
    """Discrete data of a run, built from a RunConfig."""

    config: RunConfig
    domain: Domain
    grid: GridSpec
    mask: DomainMask
    velocity: VelocitySampler
    f0: ScalarFn | SampledData
    timegrid: TimeGrid
    params: SchemeParams | None = None
    exact_flow: ExactFlow | None = None
    initial_preset: InitialPreset | None = None
    initial_params: dict[str, Any] = field(default_factory=dict)
    smooth: bool = True

    @property
    def scheme(self) -> Scheme:
        return self.config.scheme


def build_domain(config: RunConfig) -> Domain:
    d = config.domain
    if d.kind == "ball":
        return Domain.ball(d.center, d.radius)
    return Domain.box(d.lower, d.upper)


def _velocity(config: RunConfig) -> tuple[VelocitySampler, ExactFlow | None]:
    vc = config.velocity
    if vc.path is not None:
        return read_tabulated_velocity(vc.path).sampler(name=Path(vc.path).stem), None
    try:
        preset = get_velocity_preset(vc.preset)
    except KeyError as e:
        raise ConfigError(f"velocity.preset: {e.args[0]}") from e
    params = preset.validate_params(vc.params)
    sampler = preset.build(params)
    if vc.steady is not None:
        sampler.steady = vc.steady
    return sampler, preset.exact_flow(params)


def _initial(config: RunConfig) -> tuple[ScalarFn | SampledData, InitialPreset | None, dict]:
    ic = config.initial
    if ic.path is not None:
        return read_sampled_initial(ic.path), None, {}
    try:
        preset = get_initial_preset(ic.preset)
    except KeyError as e:
        raise ConfigError(f"initial.preset: {e.args[0]}") from e
    params = preset.validate_params(ic.params)
    return preset.build(params), preset, params


def velocity_sup(v: VelocitySampler, grid: GridSpec, T: float, time_samples: int = 9) -> float:
    """max_j sup |v_j| sampled on nodes and cell centres of the grid over [0, T]."""
    times = [0.0] if v.steady else np.linspace(0.0, T, time_samples)
    vmax = 0.0
    for shift in (0.0, 0.5):
        x1, x2, x3 = grid.coords()
        s = shift * grid.h
        for t in times:
            vmax = max(vmax, float(np.abs(v(float(t), x1 + s, x2 + s, x3 + s)).max(initial=0.0)))
    return vmax


def build_problem(config: RunConfig) -> Problem:
    domain = build_domain(config)
    h = config.h
    grid = GridSpec.covering(domain.lower, domain.upper, h, config.grid.margin)
    mask = DomainMask.from_domain(domain, grid)
    v, exact = _velocity(config)
    f0, preset, params = _initial(config)
    T = config.time.T
    scheme_params = None
    if config.scheme == Scheme.EXPLICIT:
        e = config.explicit
        if e.smooth_mode:
            vmax = velocity_sup(v, grid, T)
            scheme_params = SchemeParams.smooth(h, VMAX_SAFETY * vmax, e.alpha, e.beta)
        else:
            scheme_params = SchemeParams.scaled(h, e.alpha, e.beta)
        tau = scheme_params.tau
    else:
        tau = config.implicit.step(h)
    smooth = bool(v.smooth and (preset is None or preset.smooth) and not isinstance(f0, SampledData))
    logger.info(
        f"problem: {config.scheme.value} h={h:g} tau={tau:.6g} T={T:g} grid={grid.dims} "
        f"|Omega_h|={int(mask.interior.sum())} velocity={v.name}"
    )
    return Problem(
        config=config,
        domain=domain,
        grid=grid,
        mask=mask,
        velocity=v,
        f0=f0,
        timegrid=TimeGrid(tau, T),
        params=scheme_params,
        exact_flow=exact,
        initial_preset=preset,
        initial_params=params,
        smooth=smooth,
    )


def _due(n: int, every: int, last: int) -> bool:
    return n == last or (every > 0 and n % every == 0)


class SnapshotWriter:
    """Step hook writing g^n as CSV and/or VTK."""

    def __init__(self, store: ArtifactStore, formats: list[str], every: int, last: int):
        self.store = store
        self.formats = formats
        self.every = every
        self.last = last

    def __call__(self, n: int, g: ScalarField, diag: StepDiagnostics) -> None:
        if not _due(n, self.every, self.last):
            return
        if "csv" in self.formats:
            p = write_field_csv(self.store.path(f"fields/g_{n:06d}.csv"), g)
            self.store.add(p, "field")
        if "vtk" in self.formats:
            p = write_vtk_structured(self.store.path(f"fields/g_{n:06d}.vtk"), scalars={"g": g},
                                     title=f"g n={n} t={diag.t:.17g}")
            self.store.add(p, "field")


class InterfaceTracker:
    """Step hook extracting, measuring and writing the level-set interface."""

    def __init__(self, problem: Problem, store: ArtifactStore, every: int, oracle: SurfaceOracle | None):
        self.problem = problem
        self.store = store
        self.every = every
        self.last = problem.timegrid.num_steps
        self.oracle = oracle
        self.rows: list[dict] = []
        self.previous: InterfacePointSet | None = None

    def __call__(self, n: int, g: ScalarField, diag: StepDiagnostics) -> None:
        if not _due(n, self.every, self.last):
            return
        ls = self.problem.config.levelset
        raw = extract_interface(g, ls.level, self.problem.mask, n=n, t=diag.t)
        connected = None
        if self.previous is not None and self.previous.n == n - 1:
            connected = check_connectivity(self.previous, raw).ok
        self.previous = raw
        gamma = compute_payload(raw, g, ls.orient_outward, ls.gradient_floor)
        if ls.refine:
            gamma = refine_interface(gamma, g, ls.patch_size, ls.patch_aspect, ls.strategy,
                                     ls.gradient_floor, ls.orient_outward)
        self.store.add(gamma.write_csv(self.store.path(f"interface/gamma_{n:06d}.csv")), "interface")
        if "vtk" in self.problem.config.output.formats:
            self.store.add(gamma.write_vtk(self.store.path(f"interface/gamma_{n:06d}.vtk")), "interface")
        row = {
            "n": n,
            "t": diag.t,
            "points": len(raw),
            "refined_points": len(gamma),
            "degenerate": len(gamma.degenerate),
            "area": surface_integral(gamma, lambda x1, x2, x3: np.ones_like(x1)),
            "connected": np.nan if connected is None else float(connected),
        }
        if self.oracle is not None:
            err = geometry_errors(gamma, self.oracle, diag.t)
            row.update(
                hausdorff=err.hausdorff,
                normal_err=err.normal,
                curv_err=err.curvature,
                area_err=abs(row["area"] - self.oracle.area()),
            )
        self.rows.append(row)


class ErrorTracker:
    """Step hook comparing g^n with the method-of-characteristics solution.

    Errors are taken on a deterministic sample of Omega_h; the L2 error is the
    sample mean scaled to |Omega_h|, exact when the sample covers Omega_h.
    """

    def __init__(self, problem: Problem, exact: ExactSolution, every: int, derivatives: bool):
        cfg = problem.config.oracle
        self.every = every
        self.last = problem.timegrid.num_steps
        orders = (1, 2) if derivatives else ()
        self.recorder = CascadeRecorder(exact, problem.mask, orders, cfg.sample, problem.config.seed)
        self.exact = exact
        self.volume = float(problem.mask.interior.sum()) * problem.grid.h ** 3

    def __call__(self, n: int, g: ScalarField, diag: StepDiagnostics) -> None:
        if not _due(n, self.every, self.last):
            return
        rec = self.recorder
        row = rec.measure(n, diag.t, g)
        gb = g.on_base().values[tuple(rec.nodes.T)]
        diff = gb - self.exact.at_points(diag.t, rec.positions)
        row["sup_err"] = float(np.abs(diff).max(initial=0.0))
        row["l2_err"] = float(np.sqrt(np.mean(diff ** 2) * self.volume)) if len(diff) else 0.0
        rec.rows.append(row)

    def table(self) -> pd.DataFrame:
        return self.recorder.table().rename(columns={"b1": "grad_err", "b2": "hess_err"})


def diagnostics_frame(history: list[StepDiagnostics]) -> pd.DataFrame:
    rows = []
    for d in history:
        row = {"n": d.n, "t": d.t, "sup": d.sup, "max": d.max, "min": d.min}
        row.update({f"norm_{k}": v for k, v in d.norms.items()})
        row.update({f"div_{k}": v for k, v in d.div_terms.items()})
        if d.solver_iterations is not None:
            row["gmres_iterations"] = d.solver_iterations
            row["gmres_residual"] = d.solver_residual
            row["hhd_residual"] = d.hhd_residual
        rows.append(row)
    return pd.DataFrame(rows)


@dataclass
class RunResult:
    problem: Problem
    store: ArtifactStore
    trajectory: Any
    manifest: Path
    errors: pd.DataFrame | None = None
    interfaces: pd.DataFrame | None = None
    summary: dict[str, Any] = field(default_factory=dict)


def _oracle(problem: Problem) -> tuple[ExactSolution | None, SurfaceOracle | None]:
    cfg = problem.config.oracle
    if not cfg.enabled:
        return None, None
    kwargs: dict[str, Any] = {"method": cfg.method, "exact": problem.exact_flow, "box": problem.domain}
    if cfg.max_substep is not None:
        flow_map = FlowMap(v=problem.velocity, max_substep=cfg.max_substep, **kwargs)
    else:
        flow_map = FlowMap.for_run(problem.velocity, problem.timegrid.tau, problem.timegrid.T, **kwargs)
    if problem.initial_preset is None:
        raise ConfigError("oracle.enabled needs an initial preset (the exact solution composes it with the flow)")
    exact = ExactSolution(problem.f0, flow_map, cfg.fd_step)
    surface = None
    if problem.config.levelset.enabled:
        surf = problem.initial_preset.level_surface(problem.initial_params, problem.config.levelset.level)
        if surf is None:
            logger.info(f"initial preset '{problem.initial_preset.name}' has no analytic level surface; "
                        "geometry errors skipped")
        else:
            surface = SurfaceOracle(surface=surf, flow=flow_map)
    return exact, surface


def _run_scheme(problem: Problem, hooks: list, every: int):
    cfg = problem.config
    q = cfg.quadrature
    if problem.scheme == Scheme.EXPLICIT:
        from fdtransport.schemes.explicit import run_explicit

        norms = None
        if problem.params.truncate:
            norms = velocity_norms(problem.velocity, problem.domain, problem.grid.h, problem.timegrid.T)
        return run_explicit(
            problem.f0, problem.velocity, problem.mask, problem.params, problem.timegrid, hooks,
            norms_p=cfg.norms,
            quadrature_order=q.initial_order,
            velocity_order=q.velocity_order,
            window_margin=cfg.explicit.window_margin,
            snapshot_every=every,
            keep="final",
            velocity_norms=norms,
        )
    from fdtransport.schemes.implicit import run_implicit

    solver = cfg.solver
    return run_implicit(
        problem.f0, problem.velocity, problem.mask, problem.timegrid,
        SolverSettings(**solver.implicit.model_dump()),
        hooks,
        hhd_settings=SolverSettings(**solver.hhd.model_dump()),
        quadrature_order=q.initial_order,
        velocity_order=q.velocity_order,
        cache_projection=cfg.implicit.cache_projection,
        snapshot_every=every,
        keep="final",
    )


def _gcd_every(values: list[int]) -> int:
    positive = [v for v in values if v > 0]
    return math.gcd(*positive) if positive else 0


def run_pipeline(config: RunConfig, name: str | None = None) -> RunResult:
    """Execute one configured run and write its artifacts and manifest."""
    store = ArtifactStore(config.output.directory, name or config.output.name, config.scheme.value)
    try:
        return _run(config, store)
    except TransportError as e:
        store.write_manifest(exit_code=exit_code_for(e), error=f"{type(e).__name__}: {e}")
        raise


def _run(config: RunConfig, store: ArtifactStore) -> RunResult:
    problem = build_problem(config)
    last = problem.timegrid.num_steps
    exact, surface = _oracle(problem)

    hooks: list = []
    intervals = [config.output.snapshot_every]
    hooks.append(SnapshotWriter(store, config.output.formats, config.output.snapshot_every, last))
    errors = None
    if exact is not None:
        errors = ErrorTracker(problem, exact, config.oracle.every, problem.smooth and config.oracle.cascade)
        hooks.append(errors)
        intervals.append(config.oracle.every)
    tracker = None
    if config.levelset.enabled:
        every = config.levelset.every or config.output.snapshot_every
        tracker = InterfaceTracker(problem, store, every, surface)
        hooks.append(tracker)
        intervals.append(every)

    traj = _run_scheme(problem, hooks, _gcd_every(intervals))

    if config.output.diagnostics:
        store.write_frame("diagnostics.csv", diagnostics_frame(traj.history), "diagnostics")
    summary: dict[str, Any] = {
        "h": problem.grid.h,
        "tau": problem.timegrid.tau,
        "steps": last,
        "T": problem.timegrid.T,
        "quadrature_order": config.quadrature.initial_order,
        "velocity_order": config.quadrature.velocity_order,
    }
    summary.update({k: v for k, v in traj.metadata.items() if isinstance(v, (int, float, str, bool))})
    if problem.scheme == Scheme.EXPLICIT and traj.truncation is not None:
        p = store.path("truncation.json")
        p.write_text(traj.truncation.model_dump_json(indent=2) + "\n", encoding="utf-8")
        store.add(p, "truncation")
        summary["truncation_measure"] = traj.truncation.measure
        summary["truncation_bound"] = traj.truncation.bound
    if problem.scheme == Scheme.IMPLICIT:
        summary["energy_monotone"] = bool(traj.energy_monotone())
    summary["final_l2"] = lp_norm(traj.final, 2.0)

    err_df = None
    if errors is not None:
        err_df = errors.table()
        store.write_frame("errors.csv", err_df, "errors")
        final = err_df.iloc[-1].to_dict()
        summary.update({k: float(v) for k, v in final.items() if k.endswith("_err")})
    iface_df = None
    if tracker is not None:
        iface_df = pd.DataFrame(tracker.rows)
        store.write_frame("interface_summary.csv", iface_df, "interface")
        if len(iface_df):
            final = iface_df.iloc[-1].to_dict()
            summary.update({k: float(v) for k, v in final.items() if k.endswith("_err") or k == "hausdorff"})

    manifest = store.write_manifest(exit_code=0, **summary)
    logger.info(f"run '{store.manifest.name}' finished: {len(store.manifest.files)} files")
    return RunResult(problem, store, traj, manifest, err_df, iface_df, summary)
