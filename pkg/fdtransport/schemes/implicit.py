"""Implicit scheme with zero boundary values and projected velocity.

For each n, w^n = P_h u^n (Helmholtz-Hodge projection) and g^{n+1} solves, on
I = Omega_h minus its boundary,

    (g^{n+1}(x) - g^n(x)) / tau
        + 1/2 sum_j (w_j(x - h e^j) D+_j g^{n+1}(x - h e^j) + w_j(x) D+_j g^{n+1}(x)) = 0

with g^{n+1} = 0 on the boundary. No relation between tau and h is required.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from fdtransport.errors import ConfigError, PreconditionError
from fdtransport.fields.averaging import SampledData, StepVelocities, VelocitySampler, average_initial
from fdtransport.fields.timegrid import TimeGrid
from fdtransport.grid.field import ScalarField, VectorField, shift
from fdtransport.grid.lattice import DomainMask
from fdtransport.grid.operators import inner_product, lp_norm
from fdtransport.models import StepDiagnostics
from fdtransport.schemes.hhd import HHDResult, project
from fdtransport.schemes.linsolve import SolverSettings, solve_gmres
from fdtransport.schemes.weakform import TestFunction

logger = logging.getLogger(__name__)

DIVERGENCE_FACTOR = 10.0
ENERGY_SLACK = 1e-9

StepHook = Callable[[int, ScalarField, StepDiagnostics], None]


def _numbering(inner: np.ndarray) -> np.ndarray:
    num = -np.ones(inner.shape, dtype=np.int64)
    num[inner] = np.arange(int(inner.sum()))
    return num


def assemble_step_operator(w: VectorField, tau: float, mask: DomainMask) -> sp.csr_matrix:
    """A(h, tau, w) on the nodes of I, in the C order of np.argwhere(mask.inner).

    Row x: diagonal 1 + (tau/2h) sum_j (w_j(x - h e^j) - w_j(x)),
    entry -(tau/2h) w_j(x - h e^j) at x - h e^j and +(tau/2h) w_j(x) at x + h e^j,
    the off-diagonals kept only where the neighbour lies in I.
    """
    if not tau > 0:
        raise ConfigError(f"time step must be positive, got tau={tau}")
    inner = mask.inner
    n = int(inner.sum())
    c = tau / (2.0 * mask.grid.h)
    wv = w.window((0, 0, 0), mask.grid.dims).stacked()
    num = _numbering(inner)
    rows_all = num[inner]
    diag = np.ones(n)
    rows, cols, vals = [rows_all], [rows_all], [diag]
    for j in range(3):
        w_minus = shift(wv[j], j, -1)
        diag += c * (w_minus[inner] - wv[j][inner])
        for k, coeff in ((-1, -c * w_minus), (1, c * wv[j])):
            nb = (shift(num + 1, j, k) - 1)[inner]
            keep = nb >= 0
            rows.append(rows_all[keep])
            cols.append(nb[keep])
            vals.append(coeff[inner][keep])
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )


def advection_form(w: VectorField, g: ScalarField, mask: DomainMask) -> float:
    """(S g, g) over Omega_h where A = I + tau S; zero when D-.w = 0 on I."""
    inner = mask.inner
    h = mask.grid.h
    wv = w.window((0, 0, 0), mask.grid.dims).stacked()
    gv = np.where(inner, g.window((0, 0, 0), mask.grid.dims).values, 0.0)
    s = np.zeros(inner.shape)
    for j in range(3):
        dplus = (shift(gv, j, 1) - gv) / h
        s += 0.5 * (shift(wv[j] * dplus, j, -1) + wv[j] * dplus)
    return float(np.sum(np.where(inner, s * gv, 0.0))) * h ** 3


@dataclass
class SkewCheck:
    form: float  # (S g, g)
    identity: float  # -1/2 sum_I (D-.w) g^2 h^3
    bound: float  # 1/2 max_I |D-.w| ||g||^2

    @property
    def ok(self) -> bool:
        return abs(self.form) <= self.bound + 1e-12 * max(self.bound, 1e-300) + 1e-15


def skew_check(w: VectorField, g: ScalarField, mask: DomainMask) -> SkewCheck:
    """Compare the advection quadratic form with its divergence identity."""
    inner = mask.inner
    h = mask.grid.h
    div = _divergence_on_base(w, mask)
    gv = np.where(inner, g.window((0, 0, 0), mask.grid.dims).values, 0.0)
    g_sq = float(np.sum(gv ** 2)) * h ** 3
    identity = -0.5 * float(np.sum(np.where(inner, div * gv ** 2, 0.0))) * h ** 3
    bound = 0.5 * float(np.abs(div[inner]).max(initial=0.0)) * g_sq
    return SkewCheck(advection_form(w, g, mask), identity, bound)


def _divergence_on_base(w: VectorField, mask: DomainMask) -> np.ndarray:
    wv = w.window((0, 0, 0), mask.grid.dims).stacked()
    h = mask.grid.h
    return sum((wv[j] - shift(wv[j], j, -1)) / h for j in range(3))


def divergence_threshold(w: VectorField, mask: DomainMask, tolerance: float) -> float:
    """10 x solver tolerance, scaled like the Poisson right-hand side."""
    wmax = max(float(np.abs(c.values).max(initial=0.0)) for c in w)
    return DIVERGENCE_FACTOR * tolerance * max(1.0, wmax / mask.grid.h) * np.sqrt(max(mask.num_inner, 1))


def _check_inputs(g: ScalarField, w: VectorField, mask: DomainMask, hhd_tolerance: float) -> None:
    inner = mask.inner
    gw = g.window((0, 0, 0), mask.grid.dims)
    gb = gw.values
    off = float(np.abs(gb[~inner]).max(initial=0.0))
    outside = float(np.abs(g.values - gw.window(g.lo, g.shape).values).max(initial=0.0))
    if off > 0.0 or outside > 0.0:
        raise PreconditionError("g must vanish on the discrete boundary and outside Omega_h")
    wb = w.window((0, 0, 0), mask.grid.dims)
    w_off = max(float(np.abs(c.values[~inner]).max(initial=0.0)) for c in wb)
    if w_off > 0.0:
        raise PreconditionError("projected velocity must vanish on the discrete boundary")
    div = float(np.abs(_divergence_on_base(w, mask)[inner]).max(initial=0.0))
    limit = divergence_threshold(w, mask, hhd_tolerance)
    if div > limit:
        raise PreconditionError(f"velocity not discretely divergence-free: max |D-.w| = {div:.3e} > {limit:.3e}")


@dataclass
class StepReport:
    iterations: int
    residual: float


def step_implicit(
    g: ScalarField,
    w: VectorField,
    tau: float,
    mask: DomainMask,
    settings: SolverSettings | None = None,
    hhd_tolerance: float = 1e-10,
    check: bool = True,
) -> tuple[ScalarField, StepReport]:
    """Solve one implicit step; the result lives on the base window and vanishes off I."""
    settings = settings or SolverSettings()
    if check:
        _check_inputs(g, w, mask, hhd_tolerance)
    inner = mask.inner
    gb = g.window((0, 0, 0), mask.grid.dims)
    if not any(np.any(c.values[inner]) for c in w.window((0, 0, 0), mask.grid.dims)):
        return gb, StepReport(0, 0.0)
    A = assemble_step_operator(w, tau, mask)
    b = gb.values[inner]
    report = solve_gmres(lambda x: A @ x, b, settings, x0=b.copy())
    out = np.zeros(mask.grid.dims)
    out[inner] = report.x
    return ScalarField(mask.grid, out), StepReport(report.iterations, report.residual)


@dataclass
class ImplicitState:
    n: int
    t: float
    g: ScalarField
    l2: float
    report: StepReport | None


@dataclass
class ImplicitTrajectory:
    timegrid: TimeGrid
    mask: DomainMask
    history: list[StepDiagnostics]
    states: dict[int, ScalarField] = field(repr=False)
    projections: dict[int, VectorField] = field(default_factory=dict, repr=False)
    energy_pairs: list[tuple[float, float]] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    @property
    def num_steps(self) -> int:
        return self.timegrid.num_steps

    @property
    def final(self) -> ScalarField:
        return self.states[self.num_steps]

    def l2_norms(self) -> list[float]:
        return [d.norms["2"] for d in self.history]

    def state(self, n: int) -> ImplicitState:
        d = self.history[n]
        report = None if d.solver_iterations is None else StepReport(d.solver_iterations, d.solver_residual or 0.0)
        return ImplicitState(n, d.t, self.states[n], d.norms["2"], report)

    def energy_monotone(self, slack: float = ENERGY_SLACK) -> bool:
        norms = self.l2_norms()
        return all(b <= a + slack for a, b in zip(norms, norms[1:]))

    def energy_dissipative(self, slack: float = ENERGY_SLACK) -> bool:
        """(g^{n+1}, g^{n+1}) <= (g^{n+1}, g^n) at every step."""
        return all(a <= b + slack for a, b in self.energy_pairs)


def initial_state(f0, mask: DomainMask, quadrature_order: int = 3) -> ScalarField:
    """g^0 averaged from f0 and cut to I (zero on the boundary)."""
    if isinstance(f0, ScalarField):
        g0 = f0.window((0, 0, 0), mask.grid.dims)
    elif callable(f0) or isinstance(f0, SampledData):
        g0 = average_initial(f0, mask.grid, quadrature_order)
    else:
        raise PreconditionError(f"initial data must be a callable, SampledData or ScalarField, got {type(f0)}")
    return g0.restricted(mask.inner)


def run_implicit(
    f0,
    v,
    mask: DomainMask,
    timegrid: TimeGrid,
    settings: SolverSettings | None = None,
    hooks: Sequence[StepHook] = (),
    *,
    hhd_settings: SolverSettings | None = None,
    quadrature_order: int = 3,
    velocity_order: int = 3,
    cache_projection: bool | None = None,
    snapshot_every: int = 0,
    keep: str = "all",
) -> ImplicitTrajectory:
    """Average, project and step for n = 0 .. T_tau - 1.

    v is a VelocitySampler or a callable n -> u^n. The projection is reused
    across steps only for steady velocities (cache_projection defaults to
    the sampler's steady flag).
    """
    if keep not in ("all", "final"):
        raise ConfigError(f"keep must be 'all' or 'final', got {keep!r}")
    settings = settings or SolverSettings()
    hhd_settings = hhd_settings or SolverSettings()
    if isinstance(v, VelocitySampler):
        provider = StepVelocities(v, mask.grid, timegrid, velocity_order, mask)
        steady = v.steady
    elif callable(v):
        provider = v
        steady = False
    else:
        raise PreconditionError(f"velocity must be a VelocitySampler or a callable, got {type(v)}")
    cache = steady if cache_projection is None else cache_projection

    g = initial_state(f0, mask, quadrature_order)
    N = timegrid.num_steps
    inner_sel = mask.interior
    states = {0: g}
    projections: dict[int, VectorField] = {}
    history: list[StepDiagnostics] = []
    pairs: list[tuple[float, float]] = []
    cached: HHDResult | None = None
    total_iters = 0

    logger.info(f"implicit run: h={mask.grid.h:g} tau={timegrid.tau:.4g} steps={N} inner nodes={mask.num_inner}")
    report: StepReport | None = None
    hhd: HHDResult | None = None
    for n in range(N + 1):
        diag = StepDiagnostics(
            n=n,
            t=timegrid.t(n),
            sup=float(np.abs(g.values).max(initial=0.0)),
            max=float(max(g.values.max(initial=0.0), 0.0)),
            min=float(min(g.values.min(initial=0.0), 0.0)),
            norms={"2": lp_norm(g, 2.0, inner_sel)},
            window=[*g.lo, *g.shape],
            solver_iterations=None if report is None else report.iterations,
            solver_residual=None if report is None else report.residual,
            hhd_residual=None if hhd is None else hhd.div_residual,
        )
        history.append(diag)
        if hooks and (n == N or (snapshot_every > 0 and n % snapshot_every == 0)):
            for hook in hooks:
                hook(n, g, diag)
        if n == N:
            break
        if cache and cached is not None:
            hhd = cached
        else:
            hhd = project(provider(n), mask, hhd_settings)
            if cache:
                cached = hhd
        if keep == "all":
            projections[n] = hhd.w
        g_next, report = step_implicit(g, hhd.w, timegrid.tau, mask, settings, hhd_settings.tolerance)
        total_iters += report.iterations
        pairs.append((inner_product(g_next, g_next, inner_sel), inner_product(g_next, g.on_base(), inner_sel)))
        g = g_next
        if keep == "all" or n + 1 == N:
            states[n + 1] = g
        if (n + 1) % max(1, N // 10) == 0:
            logger.debug(f"step {n + 1}/{N}: |g|_2={lp_norm(g, 2.0, inner_sel):.6g} gmres={report.iterations}")

    logger.info(f"implicit run done: {total_iters} GMRES iterations in {N} steps")
    traj = ImplicitTrajectory(
        timegrid=timegrid,
        mask=mask,
        history=history,
        states=states,
        projections=projections,
        energy_pairs=pairs,
        metadata={
            "solver_iterations": [d.solver_iterations for d in history[1:]],
            "cache_projection": cache,
            "quadrature_order": quadrature_order,
            "velocity_order": velocity_order,
            "gmres_restart": settings.restart,
            "tolerance": settings.tolerance,
        },
    )
    if not traj.energy_dissipative():
        logger.warning("implicit energy inequality (g^{n+1}, g^{n+1}) <= (g^{n+1}, g^n) violated beyond slack")
    return traj


def weak_form_residual(trajectory: ImplicitTrajectory, phi: TestFunction, mode: str = "discrete") -> float:
    """Weak form of the implicit scheme tested against phi.

    mode="discrete" pairs with psi = chi_I phi and discrete differences:

        (g^0, psi^0) + sum_n (g^n, psi^{n+1} - psi^n)
          + tau/2 sum_n sum_j [(w_j g^{n+1}, D+_j psi^{n+1}) + (w_j g^{n+1}(. + h e^j), D+_j psi^{n+1})]

    which vanishes up to the projection tolerance. mode="consistency" replaces
    the differences of phi by its exact derivatives (time derivative at t_n,
    gradient at the edge midpoints); that residual tends to 0 with (h, tau).
    """
    if mode not in ("discrete", "consistency"):
        raise ConfigError(f"unknown weak-form mode '{mode}' (discrete, consistency)")
    N = trajectory.num_steps
    tg = trajectory.timegrid
    mask = trajectory.mask
    missing = [n for n in range(N + 1) if n not in trajectory.states] + [
        n for n in range(N) if n not in trajectory.projections
    ]
    if missing:
        raise PreconditionError("weak-form residual needs a trajectory run with keep='all'")
    grid = mask.grid
    h = grid.h
    h3 = h ** 3
    tau = tg.tau
    x1, x2, x3 = grid.coords()
    inner = mask.inner
    if N > 0 and np.abs(np.where(inner, phi.value(tg.t(N), x1, x2, x3), 0.0)).max() > 0.0:
        raise PreconditionError("test function must vanish at the final time step")

    def psi(n: int) -> np.ndarray:
        return np.where(inner, phi.value(tg.t(n), x1, x2, x3), 0.0)

    g = {n: trajectory.states[n].window((0, 0, 0), grid.dims).values for n in range(N + 1)}
    total = float(np.sum(g[0] * (psi(0) if mode == "discrete" else phi.value(0.0, x1, x2, x3)))) * h3
    for n in range(N):
        if mode == "discrete":
            total += float(np.sum(g[n] * (psi(n + 1) - psi(n)))) * h3
        else:
            total += float(np.sum(g[n] * phi.dt(tg.t(n), x1, x2, x3))) * h3 * tau
        wv = trajectory.projections[n].window((0, 0, 0), grid.dims).stacked()
        gn = g[n + 1]
        t1 = tg.t(n + 1)
        p1 = psi(n + 1)
        for j in range(3):
            if mode == "discrete":
                dpsi = (shift(p1, j, 1) - p1) / h
            else:
                off = [0.0, 0.0, 0.0]
                off[j] = h / 2.0
                dpsi = phi.grad(t1, x1 + off[0], x2 + off[1], x3 + off[2])[j]
            total += 0.5 * tau * float(np.sum(wv[j] * (gn + shift(gn, j, 1)) * dpsi)) * h3
    return total
