"""Velocity truncation at h^(-beta) and the truncated-set measure diagnostics."""

from __future__ import annotations

import logging
from typing import Iterable, Sequence

import numpy as np
from scipy.integrate import trapezoid

from fdtransport.fields.averaging import VelocitySampler
from fdtransport.grid.field import VectorField, shift
from fdtransport.grid.lattice import Domain
from fdtransport.models import TruncationReport, VelocityNorms

logger = logging.getLogger(__name__)

FINE_FACTOR = 4
FINE_MAX_NODES = 160


def truncate_velocity(u: VectorField, h: float, beta: float) -> tuple[VectorField, list[np.ndarray]]:
    """Clamp each component at +-h^(-beta).

    Returns the truncated field and, per axis, the boolean set of nodes where
    the value changed (aligned with u's window).
    """
    if not beta > 0:
        raise ValueError(f"truncation exponent must be positive, got beta={beta}")
    level = h ** (-beta)
    comps, sets = [], []
    for c in u:
        hit = np.abs(c.values) > level
        comps.append(c.with_values(np.where(hit, np.sign(c.values) * level, c.values)))
        sets.append(hit)
    return VectorField(tuple(comps)), sets


def neighbourhood(hit: np.ndarray, axis: int) -> np.ndarray:
    """{x, x +- h e^axis : x in A} for a 0-based axis."""
    return hit | shift(hit, axis, 1) | shift(hit, axis, -1)


class TruncationLedger:
    """Accumulates truncated-set volumes and L^3 sums over the steps of a run."""

    def __init__(self, h: float, tau: float, beta: float):
        self.h = h
        self.tau = tau
        self.beta = beta
        self.steps = 0
        self.counts = np.zeros(3)
        self.neighbourhood_counts = np.zeros(3)
        self.l3 = np.zeros(3)
        self.max_div = 0.0

    def record(self, u: VectorField, u_trunc: VectorField, sets: Sequence[np.ndarray]) -> None:
        self.steps += 1
        for j in range(3):
            self.counts[j] += int(sets[j].sum())
            self.l3[j] += float(np.sum(np.abs(u[j].values) ** 3)) * self.h ** 3 * self.tau
            if sets[j].any():
                near = neighbourhood(sets[j], j)
                self.neighbourhood_counts[j] += int(near.sum())
                v = u_trunc[j].values
                d = (shift(v, j, 1) - shift(v, j, -1)) / (2.0 * self.h)
                self.max_div = max(self.max_div, float(np.abs(d[near]).max()))

    def report(self, norms: VelocityNorms | None) -> TruncationReport:
        return _build_report(self, norms)


def _build_report(ledger: TruncationLedger, norms: VelocityNorms | None) -> TruncationReport:
    cell = ledger.h ** 3 * ledger.tau
    measure_components = [float(c * cell) for c in ledger.counts]
    m1_components = norms.m1_components if norms is not None else [0.0, 0.0, 0.0]
    m1 = float(sum(m1_components))
    report = TruncationReport(
        h=ledger.h,
        tau=ledger.tau,
        beta=ledger.beta,
        steps=ledger.steps,
        measure=float(sum(measure_components)),
        measure_components=measure_components,
        neighbourhood_measure=float(ledger.neighbourhood_counts.sum() * cell),
        m1=m1,
        m1_components=[float(m) for m in m1_components],
        bound=3.0 * m1 * ledger.h ** (3.0 * ledger.beta),
        l3_sums=[float(s) for s in ledger.l3],
        max_central_div_truncated=ledger.max_div,
        central_div_bound=2.0 * ledger.h ** (-1.0 - ledger.beta),
    )
    if not report.measure_ok:
        logger.warning(
            f"truncated measure {report.measure:.3e} exceeds 3*M1*h^(3 beta) = {report.bound:.3e}"
        )
    return report


def truncated_measure_report(
    sets: Iterable[Sequence[np.ndarray]],
    tau: float,
    h: float,
    beta: float,
    norms: VelocityNorms | None,
) -> TruncationReport:
    """Sum_j Sum_n vol(A^n_j) tau next to the bound 3 M1 h^(3 beta).

    `sets` yields, per step, the three truncated sets returned by
    truncate_velocity. L^3 sums need the velocities and are only filled by
    a TruncationLedger.
    """
    ledger = TruncationLedger(h, tau, beta)
    for step_sets in sets:
        ledger.steps += 1
        for j in range(3):
            ledger.counts[j] += int(np.sum(step_sets[j]))
            ledger.neighbourhood_counts[j] += int(np.sum(neighbourhood(step_sets[j], j)))
    return _build_report(ledger, norms)


def velocity_norms(
    v: VelocitySampler,
    box: Domain,
    h: float,
    T: float,
    time_samples: int = 17,
) -> VelocityNorms:
    """Data norms of v on a grid FINE_FACTOR times finer than h.

    The fine grid is capped at FINE_MAX_NODES per axis; derivatives use
    np.gradient and time integrals the trapezoid rule (one sample if steady).
    """
    extent = box.upper - box.lower
    spacing = max(h / FINE_FACTOR, float(extent.max()) / (FINE_MAX_NODES - 1))
    axes = [np.arange(lo, hi + 0.5 * spacing, spacing) for lo, hi in zip(box.lower, box.upper)]
    x1, x2, x3 = np.meshgrid(*axes, indexing="ij")
    dv = spacing ** 3
    times = np.array([0.0]) if v.steady else np.linspace(0.0, T, time_samples)

    grad_sq = np.zeros((len(times), 3))
    l2_sq = np.zeros((len(times), 3))
    for k, t in enumerate(times):
        vals = v(t, x1, x2, x3)
        for j in range(3):
            l2_sq[k, j] = float(np.sum(vals[j] ** 2)) * dv
            grads = np.gradient(vals[j], spacing, spacing, spacing)
            grad_sq[k, j] = float(sum(np.sum(g ** 2) for g in grads)) * dv

    if v.steady:
        grad_l2l2 = np.sqrt(grad_sq[0] * T)
    else:
        grad_l2l2 = np.sqrt(trapezoid(grad_sq, times, axis=0))
    linf_l2 = np.sqrt(l2_sq.max(axis=0))
    norms = VelocityNorms(
        T=T,
        grad_l2l2=[float(g) for g in grad_l2l2],
        linf_l2=[float(s) for s in linf_l2],
        fine_spacing=spacing,
    )
    logger.debug(f"velocity norms on spacing {spacing:.4g}: M1 = {norms.m1:.4e}")
    return norms
