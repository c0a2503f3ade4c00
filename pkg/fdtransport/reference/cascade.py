"""Smooth-case error levels of the explicit scheme and their recursions.

b^n    = g^n - f(t_n, .)
b^n_i  = D+_i g^n - d_i f(t_n, .)
b^n_ij = D-_j D+_i g^n - d_j d_i f(t_n, .)

D+_i and D-_j D+_i applied to one explicit step give closed recursions for
the difference quotients; derivative_recursion_check evaluates both sides.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from fdtransport.errors import PreconditionError
from fdtransport.grid.field import ScalarField, shift
from fdtransport.grid.lattice import DomainMask
from fdtransport.grid.operators import forward_diff, mixed_diff
from fdtransport.models import StepDiagnostics
from fdtransport.reference.oracle import DEFAULT_SAMPLE, ExactSolution, sample_nodes

logger = logging.getLogger(__name__)

ORDERS = (0, 1, 2)
RECURSION_RTOL = 1e-12


def _first_and_second(g: ScalarField, nodes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """D+_i g (k, 3) and D-_j D+_i g (k, 3, 3) at base-window nodes."""
    gp = g.window((0, 0, 0), g.grid.dims).padded(2)
    rel = nodes - np.asarray(gp.lo)
    idx = tuple(rel.T)
    first = np.stack([forward_diff(gp, i).values[idx] for i in (1, 2, 3)], axis=1)
    second = np.empty((len(nodes), 3, 3))
    for i in (1, 2, 3):
        for j in (1, 2, 3):
            second[:, i - 1, j - 1] = mixed_diff(gp, j, i).values[idx]
    return first, second


@dataclass
class CascadeRecorder:
    """Step hook recording sup-norms of the three error levels on sampled nodes of Omega_h.

    Register with run_explicit(hooks=[recorder], snapshot_every=k).
    """

    exact: ExactSolution
    mask: DomainMask
    orders: tuple[int, ...] = ORDERS
    sample: int | None = DEFAULT_SAMPLE
    seed: int = 0
    rows: list[dict] = field(default_factory=list)

    def __post_init__(self):
        bad = [o for o in self.orders if o not in ORDERS]
        if bad:
            raise PreconditionError(f"error orders must be among {ORDERS}, got {bad}")
        self.nodes = sample_nodes(self.mask.interior, self.sample, self.seed)
        self.positions = np.asarray(self.mask.grid.origin) + self.mask.grid.h * self.nodes

    def __call__(self, n: int, g: ScalarField, diag: StepDiagnostics) -> None:
        self.rows.append(self.measure(n, diag.t, g))

    def measure(self, n: int, t: float, g: ScalarField) -> dict:
        row: dict = {"n": n, "t": t}
        if 0 in self.orders:
            gb = g.window((0, 0, 0), g.grid.dims).values
            ref = self.exact.at_points(t, self.positions)
            row["b0"] = float(np.abs(gb[tuple(self.nodes.T)] - ref).max(initial=0.0))
        if 1 in self.orders or 2 in self.orders:
            first, second = _first_and_second(g, self.nodes)
            grad, hess = self.exact.derivatives(t, self.positions)
            if 1 in self.orders:
                row["b1"] = float(np.abs(first - grad).max(initial=0.0))
            if 2 in self.orders:
                row["b2"] = float(np.abs(second - hess).max(initial=0.0))
        logger.debug(f"cascade step {n}: " + ", ".join(f"{k}={v:.3e}" for k, v in row.items() if k[0] == "b"))
        return row

    def table(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows)


@dataclass
class CascadeReport:
    h: float
    table: pd.DataFrame

    def max_errors(self) -> dict[str, float]:
        return {c: float(self.table[c].max()) for c in self.table.columns if c.startswith("b")}


def error_cascade_report(
    trajectory,
    exact: ExactSolution,
    orders: tuple[int, ...] = ORDERS,
    every: int = 1,
    sample: int | None = DEFAULT_SAMPLE,
    smooth: bool = True,
) -> CascadeReport:
    """Per-step sup errors from the stored states of an explicit trajectory.

    smooth must be True: the oracle derivatives are meaningless for rough data.
    """
    if not smooth:
        raise PreconditionError("the error cascade needs a smooth (C^4) velocity and initial datum")
    recorder = CascadeRecorder(exact, trajectory.mask, tuple(orders), sample)
    for n in sorted(trajectory.states):
        if n % max(1, every) == 0 or n == trajectory.num_steps:
            recorder.rows.append(recorder.measure(n, trajectory.timegrid.t(n), trajectory.states[n]))
    return CascadeReport(trajectory.params.h, recorder.table())


def fit_order(hs, errors) -> float:
    """Least-squares slope of log(error) against log(h)."""
    hs = np.asarray(hs, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if len(hs) < 2:
        raise PreconditionError("an order fit needs at least two resolutions")
    if np.any(errors <= 0):
        return float("inf")
    slope, _ = np.polyfit(np.log(hs), np.log(errors), 1)
    return float(slope)


def fit_cascade_orders(reports: list[CascadeReport]) -> dict[str, float]:
    """Observed orders of max-over-steps errors across resolutions."""
    hs = [r.h for r in reports]
    keys = reports[0].max_errors().keys()
    return {k: fit_order(hs, [r.max_errors()[k] for r in reports]) for k in keys}


@dataclass
class GrowthFit:
    """Smallest c1, c2 >= 0 with R^{n+1} - R^n <= c1 tau R^n + c2 h^alpha tau at every step."""

    c1: float
    c2: float
    slack: float

    @property
    def ok(self) -> bool:
        return self.slack <= 1e-12 and np.isfinite(self.c1) and np.isfinite(self.c2)


def fit_growth_constants(errors, tau: float, h: float, alpha: float) -> GrowthFit:
    """Fit the linear growth bound on a per-step error sequence.

    c2 covers steps with R^n = 0; c1 is then the largest remaining ratio.
    """
    r = np.asarray(errors, dtype=float)
    inc = np.diff(r)
    base = r[:-1]
    c2 = float(max(0.0, np.max(np.where(base == 0.0, inc, 0.0), initial=0.0))) / (h ** alpha * tau)
    rest = inc - c2 * h ** alpha * tau
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(base > 0.0, rest / (tau * base), 0.0)
    c1 = float(max(0.0, np.max(ratios, initial=0.0)))
    slack = float(np.max(inc - c1 * tau * base - c2 * h ** alpha * tau, initial=0.0))
    return GrowthFit(c1, c2, slack)


def _s(a: np.ndarray, *offsets: tuple[int, int]) -> np.ndarray:
    """a(x + sum k e^axis) for (axis, k) pairs."""
    for axis, k in offsets:
        a = shift(a, axis, k)
    return a


def _dp(a: np.ndarray, i: int, h: float) -> np.ndarray:
    return (shift(a, i, 1) - a) / h


def _dm(a: np.ndarray, j: int, h: float) -> np.ndarray:
    return (a - shift(a, j, -1)) / h


def _dc(a: np.ndarray, k: int, h: float) -> np.ndarray:
    return (shift(a, k, 1) - shift(a, k, -1)) / (2.0 * h)


def _average(a: np.ndarray) -> np.ndarray:
    out = a / 7.0
    for k in range(3):
        out = out + (shift(a, k, 1) + shift(a, k, -1)) / 7.0
    return out


@dataclass
class RecursionDefect:
    first: float
    second: float
    scale: float

    @property
    def ok(self) -> bool:
        return max(self.first, self.second) <= RECURSION_RTOL * max(self.scale, 1.0)


def derivative_recursion_check(trajectory, steps=None, trim: int = 2) -> RecursionDefect:
    """Evaluate the difference-quotient recursions on stored steps.

    First level, with g_i = D+_i g:
      g_i^{n+1} = avg g_i^n - tau u(x + h e^i) . D g_i^n - tau/2 sum_k D+_i u_k (g_k + g_k(x - h e^k))
    Second level, with g_ij = D-_j D+_i g, is the D-_j difference of the
    first, expanded with the discrete product rule. Both hold exactly up
    to rounding when the window was not capped.
    """
    h, tau = trajectory.params.h, trajectory.params.tau
    N = trajectory.num_steps
    steps = range(N) if steps is None else steps
    worst1 = worst2 = scale = 0.0
    for n in steps:
        if n not in trajectory.states or n + 1 not in trajectory.states or n not in trajectory.velocities:
            raise PreconditionError(f"step {n} not stored; run with keep='all'")
        g0 = trajectory.states[n].padded(3)
        lo, shape = g0.lo, g0.shape
        g = g0.values
        g1 = trajectory.states[n + 1].window(lo, shape).values
        u = trajectory.velocities[n].window(lo, shape).stacked()
        gi = [_dp(g, i, h) for i in range(3)]
        gij = [[_dm(gi[i], j, h) for j in range(3)] for i in range(3)]
        inner = tuple(slice(trim, s - trim) for s in shape)
        for i in range(3):
            lhs = _dp(g1, i, h)
            rhs = _average(gi[i])
            for k in range(3):
                rhs -= tau * _s(u[k], (i, 1)) * _dc(gi[i], k, h)
                rhs -= 0.5 * tau * _dp(u[k], i, h) * (gi[k] + _s(gi[k], (k, -1)))
            worst1 = max(worst1, float(np.abs(lhs - rhs)[inner].max()))
            scale = max(scale, float(np.abs(lhs).max()))
            for j in range(3):
                lhs2 = _dm(_dp(g1, i, h), j, h)
                rhs2 = _average(gij[i][j])
                for k in range(3):
                    gik = gij[i][k]
                    gjk = gij[j][k]
                    rhs2 -= tau * _s(u[k], (i, 1)) * _dc(gij[i][j], k, h)
                    rhs2 -= 0.5 * tau * _dm(_s(u[k], (i, 1)), j, h) * (_s(gik, (j, -1), (k, 1)) + _s(gik, (j, -1)))
                    rhs2 -= 0.5 * tau * _dp(u[k], i, h) * (_s(gjk, (j, -1), (k, 1)) + _s(gjk, (j, -1)))
                    rhs2 -= 0.5 * tau * _dm(_dp(u[k], i, h), j, h) * (_s(gi[k], (j, -1)) + _s(gi[k], (j, -1), (k, -1)))
                worst2 = max(worst2, float(np.abs(lhs2 - rhs2)[inner].max()))
                scale = max(scale, float(np.abs(lhs2).max()))
    defect = RecursionDefect(worst1, worst2, scale)
    if not defect.ok:
        logger.warning(f"derivative recursion defect {max(worst1, worst2):.3e} (scale {scale:.3e})")
    return defect
