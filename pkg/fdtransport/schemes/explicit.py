"""Truncated Lax-Friedrichs explicit scheme.

g^{n+1}(x) = (1/7) g^n(x)
           + sum_j [(1/7 + (tau/2h) u_j(x)) g^n(x - h e^j) + (1/7 - (tau/2h) u_j(x)) g^n(x + h e^j)]

with u the truncated velocity. The support of g^n grows by one cell per step;
the window is capped at the bounding box of Omega_h plus a margin.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from fdtransport.errors import ConfigError, PreconditionError, SchemeInvariantError
from fdtransport.fields.averaging import (
    SampledData,
    StepVelocities,
    VelocitySampler,
    average_initial,
)
from fdtransport.fields.timegrid import CFL_LIMIT, SchemeParams, TimeGrid
from fdtransport.fields.truncation import TruncationLedger, truncate_velocity
from fdtransport.grid.field import ScalarField, VectorField, shift
from fdtransport.grid.lattice import DomainMask, Index
from fdtransport.grid.operators import divergence, lp_norm
from fdtransport.models import StepDiagnostics, TruncationReport, VelocityNorms
from fdtransport.schemes.weakform import TestFunction

logger = logging.getLogger(__name__)

SCALING_RTOL = 1e-12
COEFF_TOL = 1e-14
GROWTH_SLACK = 1e-12
ORDER_TOL = 1e-14

StepHook = Callable[[int, ScalarField, StepDiagnostics], None]
VelocityProvider = Callable[[int], VectorField]


def check_exponents(a: float, b: float) -> None:
    """alpha > 0, beta > 1/2 and alpha + beta < 1."""
    if not a > 0:
        raise ConfigError(f"scaling condition alpha > 0 violated (alpha={a})")
    if not b > 0.5:
        raise ConfigError(f"scaling condition beta > 1/2 violated (beta={b})")
    if not a + b < 1:
        raise ConfigError(f"scaling condition alpha + beta < 1 violated (alpha + beta={a + b})")


def check_scaling(params: SchemeParams) -> SchemeParams:
    """Validate the generalized hyperbolic scaling and annotate the CFL margin.

    Requires alpha > 0, beta > 1/2, alpha + beta < 1, tau = h^(2 - alpha) and
    h^(1 - (alpha + beta)) <= 2/7. The margin is 1/7 - (tau/2h) h^(-beta), the
    smallest possible stencil coefficient.
    """
    a, b, h, tau = params.alpha, params.beta, params.h, params.tau
    if not h > 0:
        raise ConfigError(f"grid spacing must be positive, got h={h}")
    check_exponents(a, b)
    expected = h ** (2.0 - a)
    if not math.isclose(tau, expected, rel_tol=SCALING_RTOL, abs_tol=0.0):
        raise ConfigError(f"scaling condition tau = h^(2-alpha) violated (tau={tau}, h^(2-alpha)={expected})")
    lhs = h ** (1.0 - (a + b))
    if lhs > CFL_LIMIT:
        raise ConfigError(
            f"scaling condition h^(1-(alpha+beta)) <= 2/7 violated ({lhs:.6g} > {CFL_LIMIT:.6g}); refine h"
        )
    margin = 1.0 / 7.0 - params.courant * h ** (-b)
    return params.annotated(cfl_margin=margin, truncate=True)


def check_cfl(u: VectorField, params: SchemeParams) -> float:
    """Smallest stencil coefficient 1/7 - (tau/2h)|u_j(x)|; raises if negative."""
    umax = max(float(np.abs(c.values).max(initial=0.0)) for c in u)
    coeff = 1.0 / 7.0 - params.courant * umax
    if coeff < -COEFF_TOL:
        raise SchemeInvariantError(
            f"negative stencil coefficient {coeff:.3e}: tau/2h * |u| = {params.courant * umax:.6g} > 1/7"
        )
    return coeff


def _stencil_sum_check(u: np.ndarray, c: float, samples: int = 8) -> None:
    flat = u.reshape(3, -1)
    idx = np.linspace(0, flat.shape[1] - 1, num=min(samples, flat.shape[1])).astype(int)
    for k in idx:
        s = 1.0 / 7.0
        for j in range(3):
            s += (1.0 / 7.0 + c * flat[j, k]) + (1.0 / 7.0 - c * flat[j, k])
        if abs(s - 1.0) > COEFF_TOL:
            raise SchemeInvariantError(f"stencil coefficients sum to {s!r}, not 1")


def step_explicit(
    g: ScalarField,
    u_trunc: VectorField,
    params: SchemeParams,
    check: bool = True,
) -> ScalarField:
    """One step on the window of g grown by one cell per side."""
    c = params.courant
    gp = g.padded(1)
    lo, shape = gp.lo, gp.shape
    uw = u_trunc.window(lo, shape)
    if check:
        check_cfl(uw, params)
        _stencil_sum_check(uw.stacked(), c)
    v = gp.values
    out = v / 7.0
    for j in range(3):
        uj = uw[j].values
        out = out + (1.0 / 7.0 + c * uj) * shift(v, j, -1) + (1.0 / 7.0 - c * uj) * shift(v, j, 1)
    return ScalarField(g.grid, out, lo)


def _support_window(g: ScalarField) -> ScalarField:
    nz = np.argwhere(g.values != 0.0)
    if len(nz) == 0:
        return ScalarField(g.grid, np.zeros((1, 1, 1)), g.lo)
    lo = nz.min(axis=0)
    hi = nz.max(axis=0) + 1
    new_lo = tuple(int(l + a) for l, a in zip(g.lo, lo))
    return g.window(new_lo, tuple(int(v) for v in hi - lo))


@dataclass
class WindowCap:
    """Bounding box of Omega_h grown by `margin` cells; windows are clipped to it."""

    lo: Index
    hi: Index  # exclusive
    hit: bool = False

    @classmethod
    def around(cls, mask: DomainMask, margin: int) -> "WindowCap":
        blo, bhi = mask.bounding_box()
        return cls(
            lo=tuple(v - margin for v in blo),
            hi=tuple(v + 1 + margin for v in bhi),
        )

    def apply(self, g: ScalarField) -> ScalarField:
        if all(a >= l for a, l in zip(g.lo, self.lo)) and all(b <= h for b, h in zip(g.hi, self.hi)):
            return g
        if not self.hit:
            logger.warning(
                f"support of g reached the window cap {self.lo}..{self.hi}; values beyond it are dropped"
            )
            self.hit = True
        lo = tuple(max(a, l) for a, l in zip(g.lo, self.lo))
        hi = tuple(min(b, h) for b, h in zip(g.hi, self.hi))
        return g.window(lo, tuple(b - a for a, b in zip(lo, hi)))


@dataclass
class ExplicitState:
    n: int
    t: float
    g: ScalarField
    params: SchemeParams
    history: list[StepDiagnostics]


@dataclass
class ExplicitTrajectory:
    """Result of run_explicit.

    states holds g^n for stored steps (all steps when keep="all"),
    velocities the truncated u^n used for step n -> n+1 (keep="all" only).
    """

    params: SchemeParams
    timegrid: TimeGrid
    mask: DomainMask
    history: list[StepDiagnostics]
    states: dict[int, ScalarField] = field(repr=False)
    velocities: dict[int, VectorField] = field(default_factory=dict, repr=False)
    raw_velocities: dict[int, VectorField] = field(default_factory=dict, repr=False)
    norms_p: tuple[float, ...] = (1.0, 2.0)
    truncation: TruncationReport | None = None
    window_capped: bool = False
    metadata: dict = field(default_factory=dict)

    @property
    def num_steps(self) -> int:
        return self.timegrid.num_steps

    @property
    def g0(self) -> ScalarField:
        return self.states[0]

    @property
    def final(self) -> ScalarField:
        return self.states[self.num_steps]

    def state(self, n: int) -> ExplicitState:
        if n not in self.states:
            raise KeyError(f"step {n} was not stored (stored: {sorted(self.states)[:10]}...)")
        return ExplicitState(n, self.timegrid.t(n), self.states[n], self.params, self.history[: n + 1])

    def sup_norms(self) -> list[float]:
        return [d.sup for d in self.history]


def _key(p: float) -> str:
    return "inf" if p == np.inf else f"{p:g}"


def _initial_field(f0, mask: DomainMask, quadrature_order: int) -> ScalarField:
    if isinstance(f0, ScalarField):
        return f0
    if callable(f0) or isinstance(f0, SampledData):
        return average_initial(f0, mask.grid, quadrature_order)
    raise PreconditionError(f"initial data must be a callable, SampledData or ScalarField, got {type(f0)}")


def _provider(v, mask: DomainMask, timegrid: TimeGrid, velocity_order: int) -> VelocityProvider:
    if isinstance(v, VelocitySampler):
        return StepVelocities(v, mask.grid, timegrid, velocity_order, mask)
    if callable(v):
        return v
    raise PreconditionError(f"velocity must be a VelocitySampler or a callable n -> VectorField, got {type(v)}")


class _Stepper:
    """Velocity preparation and stepping shared by run_explicit and compare_runs."""

    def __init__(self, provider: VelocityProvider, params: SchemeParams, cap: WindowCap | None,
                 ledger: TruncationLedger | None):
        self.provider = provider
        self.params = params
        self.cap = cap
        self.ledger = ledger
        self._last: tuple[int, VectorField, VectorField, ScalarField] | None = None

    def velocity(self, n: int) -> tuple[VectorField, VectorField, ScalarField]:
        """(u^n, truncated u^n, central divergence of the truncated field)."""
        if self._last is not None and self._last[0] == n:
            return self._last[1:]
        u = self.provider(n)
        if self.params.truncate:
            ut, sets = truncate_velocity(u, self.params.h, self.params.beta)
            if self.ledger is not None:
                self.ledger.record(u, ut, sets)
        else:
            ut = u
        div = divergence(ut, kind="central")
        self._last = (n, u, ut, div)
        return u, ut, div

    def step(self, g: ScalarField, n: int) -> ScalarField:
        _, ut, _ = self.velocity(n)
        nxt = step_explicit(g, ut, self.params)
        if self.cap is not None:
            nxt = self.cap.apply(nxt)
        return nxt


def _diagnostics(n: int, t: float, g: ScalarField, norms_p, div: ScalarField | None, tau: float) -> StepDiagnostics:
    vals = g.values
    norms = {_key(p): lp_norm(g, p) for p in norms_p}
    div_terms = {}
    if div is not None:
        d = div.window(g.lo, g.shape).values
        for p in norms_p:
            if p != np.inf:
                div_terms[_key(p)] = float(np.sum(d * np.abs(vals) ** p)) * g.h ** 3 * tau
    return StepDiagnostics(
        n=n,
        t=t,
        sup=float(np.abs(vals).max(initial=0.0)),
        max=float(max(vals.max(initial=0.0), 0.0)),
        min=float(min(vals.min(initial=0.0), 0.0)),
        norms=norms,
        div_terms=div_terms,
        window=[*g.lo, *g.shape],
    )


def run_explicit(
    f0,
    v,
    mask: DomainMask,
    params: SchemeParams,
    timegrid: TimeGrid,
    hooks: Sequence[StepHook] = (),
    *,
    norms_p: Iterable[float] = (1.0, 2.0),
    quadrature_order: int = 3,
    velocity_order: int = 3,
    window_margin: int = 4,
    snapshot_every: int = 0,
    keep: str = "all",
    velocity_norms: VelocityNorms | None = None,
) -> ExplicitTrajectory:
    """Run n = 0 .. T_tau, recording norms and the divergence terms of the L^p chain.

    f0 is a callable, SampledData or a precomputed g^0; v a VelocitySampler or
    a callable n -> u^n. With params.truncate the scaling is validated first;
    otherwise (smooth mode) only the CFL condition is enforced.
    Hooks receive (n, g^n, diagnostics) every `snapshot_every` steps and at
    the final step.
    """
    if keep not in ("all", "final"):
        raise ConfigError(f"keep must be 'all' or 'final', got {keep!r}")
    if params.truncate:
        params = check_scaling(params)
    if not math.isclose(params.tau, timegrid.tau, rel_tol=1e-15, abs_tol=0.0):
        raise ConfigError(f"scheme tau {params.tau} differs from time grid tau {timegrid.tau}")
    norms_p = tuple(float(p) for p in norms_p)
    if any(not (p == np.inf or p >= 1) for p in norms_p):
        raise ConfigError(f"norm exponents must be >= 1 or inf, got {norms_p}")

    provider = _provider(v, mask, timegrid, velocity_order)
    ledger = TruncationLedger(params.h, params.tau, params.beta) if params.truncate else None
    cap = WindowCap.around(mask, window_margin)
    stepper = _Stepper(provider, params, cap, ledger)

    g = _support_window(cap.apply(_initial_field(f0, mask, quadrature_order)))
    N = timegrid.num_steps
    states: dict[int, ScalarField] = {0: g}
    velocities: dict[int, VectorField] = {}
    raw: dict[int, VectorField] = {}
    history: list[StepDiagnostics] = []

    if not params.truncate and N > 0:
        _, ut, _ = stepper.velocity(0)
        margin = check_cfl(ut, params)
        params = params.annotated(cfl_margin=margin)
        stepper.params = params

    logger.info(
        f"explicit run: h={params.h:g} tau={params.tau:.4g} steps={N} "
        f"truncate={params.truncate} branch={params.tau_branch}"
    )
    for n in range(N + 1):
        div = None
        if n < N:
            u, ut, div = stepper.velocity(n)
            if keep == "all":
                velocities[n] = ut
                raw[n] = u
        diag = _diagnostics(n, timegrid.t(n), g, norms_p, div, params.tau)
        history.append(diag)
        if hooks and (n == N or (snapshot_every > 0 and n % snapshot_every == 0)):
            for hook in hooks:
                hook(n, g, diag)
        if n == N:
            break
        g = stepper.step(g, n)
        if keep == "all" or n + 1 == N:
            states[n + 1] = g
        if (n + 1) % max(1, N // 10) == 0:
            logger.debug(f"step {n + 1}/{N}: sup={float(np.abs(g.values).max()):.6g} window={g.shape}")

    truncation = ledger.report(velocity_norms) if ledger is not None else None
    return ExplicitTrajectory(
        params=params,
        timegrid=timegrid,
        mask=mask,
        history=history,
        states=states,
        velocities=velocities,
        raw_velocities=raw,
        norms_p=norms_p,
        truncation=truncation,
        window_capped=cap.hit,
        metadata={
            "tau_branch": params.tau_branch,
            "truncate": params.truncate,
            "cfl_margin": params.cfl_margin,
            "window_margin": window_margin,
            "quadrature_order": quadrature_order,
            "velocity_order": velocity_order,
        },
    )


@dataclass
class GrowthCheck:
    p: float
    lhs: list[float]
    rhs: list[float]
    slack: float = GROWTH_SLACK

    @property
    def ok(self) -> bool:
        return all(a <= b + self.slack for a, b in zip(self.lhs, self.rhs))

    @property
    def worst_excess(self) -> float:
        return max((a - b for a, b in zip(self.lhs, self.rhs)), default=0.0)


def lp_growth_bound(trajectory: ExplicitTrajectory, p: float) -> GrowthCheck:
    """||g^n||_p^p against ||g^0||_p^p + sum_{m<n} sum_x (D.u^m)|g^m|^p h^3 tau.

    Uses the per-step norms and divergence terms recorded by run_explicit, so
    p must be one of the trajectory's norm exponents.
    """
    key = _key(float(p))
    if p == np.inf or key not in trajectory.history[0].norms:
        raise ValueError(f"p={p} was not recorded (recorded: {trajectory.norms_p}, finite only)")
    lhs, rhs = [], []
    base = trajectory.history[0].norms[key] ** p
    acc = 0.0
    for d in trajectory.history:
        lhs.append(d.norms[key] ** p)
        rhs.append(base + acc)
        acc += d.div_terms.get(key, 0.0)
    check = GrowthCheck(p=float(p), lhs=lhs, rhs=rhs)
    if not check.ok:
        logger.warning(f"L^{p} growth chain violated by {check.worst_excess:.3e}")
    return check


@dataclass
class ComparisonCertificate:
    """Per-step min(g_high^n - g_low^n); ok when every gap is >= -1e-14."""

    gaps: list[float]
    tolerance: float = ORDER_TOL

    @property
    def min_gap(self) -> float:
        return min(self.gaps)

    @property
    def ok(self) -> bool:
        return self.min_gap >= -self.tolerance


def compare_runs(
    f0_low,
    f0_high,
    v,
    mask: DomainMask,
    params: SchemeParams,
    timegrid: TimeGrid,
    over: str | None = None,
    *,
    quadrature_order: int = 3,
    velocity_order: int = 3,
    window_margin: int = 4,
) -> ComparisonCertificate:
    """Run both initial data with the same velocities and track the smallest gap.

    over=None measures on all of hZ^3 (nodes outside both windows count as
    gap 0); a region name ("interior", "inner") restricts to that part of Omega_h.
    """
    if params.truncate:
        params = check_scaling(params)
    provider = _provider(v, mask, timegrid, velocity_order)
    cap = WindowCap.around(mask, window_margin)
    stepper = _Stepper(provider, params, cap, None)
    lo_g = cap.apply(_initial_field(f0_low, mask, quadrature_order))
    hi_g = cap.apply(_initial_field(f0_high, mask, quadrature_order))

    def gap(a: ScalarField, b: ScalarField) -> float:
        d = b - a
        if over is None:
            return min(float(d.values.min()), 0.0)
        sel = mask.on(d.lo, d.shape, over)
        if not sel.any():
            return 0.0
        return float(d.values[sel].min())

    gaps = [gap(lo_g, hi_g)]
    if not params.truncate and timegrid.num_steps > 0:
        check_cfl(stepper.velocity(0)[1], params)
    for n in range(timegrid.num_steps):
        lo_g = stepper.step(lo_g, n)
        hi_g = stepper.step(hi_g, n)
        gaps.append(gap(lo_g, hi_g))
    cert = ComparisonCertificate(gaps=gaps)
    if not cert.ok:
        logger.warning(f"comparison principle violated: min gap {cert.min_gap:.3e}")
    return cert


@dataclass
class WeakFormTerms:
    initial: float
    time: float
    divergence: float
    advection: float
    remainder: float

    @property
    def total(self) -> float:
        return self.initial + self.time + self.divergence + self.advection + self.remainder


def weak_form_terms(trajectory: ExplicitTrajectory, phi: TestFunction) -> WeakFormTerms:
    """The five sums of the discrete weak form of the explicit scheme.

    initial     sum_x g^0 phi(0, x) h^3
    time        sum_n sum_x g^{n+1} d_t phi(t_{n+1}, x) h^3 tau
    divergence  sum_j sum_n sum_x D_j u_j(x) g^n(x) phi(t_n, x - h e^j) h^3 tau
    advection   sum_j sum_n sum_x u_j(x + h e^j) g^n(x) d_j phi(t_n, x) h^3 tau
    remainder   sum_j sum_n sum_x u_j(x + h e^j) g^n(x) (D_j phi - d_j phi)(t_n, x) h^3 tau

    Their total is O(h^alpha) and tends to 0 with h.
    """
    N = trajectory.num_steps
    tg = trajectory.timegrid
    if not phi.vanishes_after(tg.t(N)) and N > 0:
        last = trajectory.states.get(N)
        if last is not None and np.abs(phi.value(tg.t(N), *last.coords())).max(initial=0.0) > 0.0:
            raise PreconditionError("test function must vanish at the final time step")
    missing = [n for n in range(N + 1) if n not in trajectory.states] + [
        n for n in range(N) if n not in trajectory.velocities
    ]
    if missing:
        raise PreconditionError("weak-form residual needs a trajectory run with keep='all'")

    h, tau = trajectory.params.h, trajectory.params.tau
    w = h ** 3
    g0 = trajectory.states[0]
    initial = float(np.sum(g0.values * phi.value(0.0, *g0.coords()))) * w
    time = div_term = adv = rem = 0.0
    for n in range(N):
        g1 = trajectory.states[n + 1]
        time += float(np.sum(g1.values * phi.dt(tg.t(n + 1), *g1.coords()))) * w * tau

        g = trajectory.states[n].padded(1)
        x1, x2, x3 = g.coords()
        t = tg.t(n)
        ut = trajectory.velocities[n].window(g.lo, g.shape)
        grad = phi.grad(t, x1, x2, x3)
        for j in range(3):
            uj = ut[j].values
            e = [0.0, 0.0, 0.0]
            e[j] = h
            phi_minus = phi.value(t, x1 - e[0], x2 - e[1], x3 - e[2])
            phi_plus = phi.value(t, x1 + e[0], x2 + e[1], x3 + e[2])
            d_u = (shift(uj, j, 1) - shift(uj, j, -1)) / (2.0 * h)
            u_next = shift(uj, j, 1)
            div_term += float(np.sum(d_u * g.values * phi_minus)) * w * tau
            adv += float(np.sum(u_next * g.values * grad[j])) * w * tau
            rem += float(np.sum(u_next * g.values * ((phi_plus - phi_minus) / (2.0 * h) - grad[j]))) * w * tau
    return WeakFormTerms(initial, time, div_term, adv, rem)


def weak_form_residual(trajectory: ExplicitTrajectory, phi: TestFunction) -> float:
    """Total of the five weak-form sums; a convergence diagnostic."""
    return weak_form_terms(trajectory, phi).total
