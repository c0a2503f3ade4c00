"""Discrete Helmholtz-Hodge decomposition u = w + D+phi on Omega_h.

With I = Omega_h minus its boundary, phi (zero off I) solves

    D-.(chi_I D+phi) = D-.(chi_I u)   on I

and w = chi_I (u - D+phi). Then D-.w = 0 on I and w vanishes on the boundary.
The operator -D-.(chi_I D+ .) restricted to I is symmetric positive definite,
so conjugate gradients apply.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from fdtransport.errors import DomainError, PreconditionError, SchemeInvariantError
from fdtransport.grid.export import write_vtk_structured
from fdtransport.grid.field import ScalarField, VectorField, shift
from fdtransport.grid.lattice import DomainMask
from fdtransport.grid.operators import divergence, gradient
from fdtransport.schemes.linsolve import SolverSettings, solve_cg

logger = logging.getLogger(__name__)

DENSE_ORACLE_MAX_NODES = 12 ** 3
NORM_SLACK = 1e-8


def _base(u: VectorField, mask: DomainMask) -> VectorField:
    return u.window((0, 0, 0), mask.grid.dims)


def _div_chi(q: np.ndarray, inner: np.ndarray, h: float) -> np.ndarray:
    """D-.(chi_I q) for q of shape (3, ...)."""
    out = np.zeros(inner.shape)
    for j in range(3):
        c = np.where(inner, q[j], 0.0)
        out += (c - shift(c, j, -1)) / h
    return out


def _grad(phi: np.ndarray, h: float) -> np.ndarray:
    return np.stack([(shift(phi, j, 1) - phi) / h for j in range(3)])


class PoissonOperator:
    """Matrix-free A = -D-.(chi_I D+ .) acting on vectors indexed by I."""

    def __init__(self, mask: DomainMask):
        self.mask = mask
        self.inner = mask.inner
        self.h = mask.grid.h
        self.n = int(self.inner.sum())
        if self.n == 0:
            raise DomainError("Omega_h has no nodes off its boundary; refine h")

    def scatter(self, x: np.ndarray) -> np.ndarray:
        arr = np.zeros(self.inner.shape)
        arr[self.inner] = x
        return arr

    def matvec(self, x: np.ndarray) -> np.ndarray:
        phi = self.scatter(np.ravel(x))
        return -_div_chi(_grad(phi, self.h), self.inner, self.h)[self.inner]

    def rhs(self, u: VectorField) -> np.ndarray:
        """-D-.(chi_I u) on I."""
        return -_div_chi(u.stacked(), self.inner, self.h)[self.inner]


def assemble_poisson(mask: DomainMask) -> sp.csr_matrix:
    """Sparse matrix of PoissonOperator (rows and columns in I order, C-ordered)."""
    inner = mask.inner
    h2 = mask.grid.h ** 2
    number = -np.ones(inner.shape, dtype=np.int64)
    nodes = np.argwhere(inner)
    number[inner] = np.arange(len(nodes))
    rows, cols, vals = [], [], []
    dims = inner.shape
    for r, x in enumerate(nodes):
        diag = 0.0
        for j in range(3):
            up = x.copy()
            up[j] += 1
            dn = x.copy()
            dn[j] -= 1
            diag += 1.0
            if up[j] < dims[j] and inner[tuple(up)]:
                rows.append(r)
                cols.append(number[tuple(up)])
                vals.append(-1.0 / h2)
            if dn[j] >= 0 and inner[tuple(dn)]:
                diag += 1.0
                rows.append(r)
                cols.append(number[tuple(dn)])
                vals.append(-1.0 / h2)
        rows.append(r)
        cols.append(r)
        vals.append(diag / h2)
    n = len(nodes)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


@dataclass
class HHDResult:
    """w (divergence-free part), phi (potential) and solve diagnostics.

    div_residual is max |D-.w| on I, reconstruction_residual max |w + D+phi - u| on I.
    u_sq, w_sq and grad_sq are the squared L2 norms over I.
    """

    w: VectorField
    phi: ScalarField
    div_residual: float
    reconstruction_residual: float
    iterations: int
    linear_residual: float
    u_sq: float
    w_sq: float
    grad_sq: float
    orthogonality: float

    def norm_bounds_ok(self, slack: float = NORM_SLACK) -> bool:
        bound = self.u_sq * (1.0 + slack) + 1e-300
        return self.w_sq <= bound and self.grad_sq <= bound

    def write_vtk(self, path: str | Path) -> Path:
        return write_vtk_structured(
            path,
            scalars={"phi": self.phi},
            vectors={"w": self.w, "grad_phi": gradient(self.phi, "forward")},
            title="discrete Helmholtz-Hodge decomposition",
        )


def _finish(u: VectorField, mask: DomainMask, phi_arr: np.ndarray, iterations: int, lin_res: float) -> HHDResult:
    h = mask.grid.h
    inner = mask.inner
    h3 = h ** 3
    uv = u.stacked()
    gphi = _grad(phi_arr, h)
    w = np.where(inner, uv - gphi, 0.0)
    div_w = np.zeros(inner.shape)
    for j in range(3):
        div_w += (w[j] - shift(w[j], j, -1)) / h
    div_res = float(np.abs(div_w[inner]).max(initial=0.0))
    recon = float(np.abs((w + gphi - uv)[:, inner]).max(initial=0.0))
    u_sq = float(np.sum(uv[:, inner] ** 2)) * h3
    w_sq = float(np.sum(w[:, inner] ** 2)) * h3
    g_sq = float(np.sum(gphi[:, inner] ** 2)) * h3
    orth = float(np.sum(w[:, inner] * gphi[:, inner])) * h3
    grid = mask.grid
    result = HHDResult(
        w=VectorField.from_arrays(grid, w),
        phi=ScalarField(grid, phi_arr),
        div_residual=div_res,
        reconstruction_residual=recon,
        iterations=iterations,
        linear_residual=lin_res,
        u_sq=u_sq,
        w_sq=w_sq,
        grad_sq=g_sq,
        orthogonality=orth,
    )
    if not result.norm_bounds_ok():
        raise SchemeInvariantError(
            f"projection norm bound violated: |w|^2={w_sq:.6g}, |D+phi|^2={g_sq:.6g} > |u|^2={u_sq:.6g}"
        )
    return result


def project(u: VectorField, mask: DomainMask, settings: SolverSettings | None = None) -> HHDResult:
    """Split u into a divergence-free part vanishing on the boundary plus a gradient."""
    settings = settings or SolverSettings()
    op = PoissonOperator(mask)
    ub = _base(u, mask)
    b = op.rhs(ub)
    report = solve_cg(op.matvec, b, settings, what="hhd poisson")
    result = _finish(ub, mask, op.scatter(report.x), report.iterations, report.residual)
    logger.debug(
        f"hhd: {op.n} unknowns, {report.iterations} CG iterations, max |D-.w| = {result.div_residual:.3e}"
    )
    return result


def dense_project(u: VectorField, mask: DomainMask) -> HHDResult:
    """Same decomposition by a dense direct solve; for small masks in tests."""
    n = mask.num_inner
    if n > DENSE_ORACLE_MAX_NODES:
        raise PreconditionError(f"dense oracle limited to {DENSE_ORACLE_MAX_NODES} unknowns, got {n}")
    op = PoissonOperator(mask)
    ub = _base(u, mask)
    A = assemble_poisson(mask).toarray()
    x = np.linalg.solve(A, op.rhs(ub))
    return _finish(ub, mask, op.scatter(x), 0, 0.0)


@dataclass
class StabilityGap:
    """sum_I |u - w|^2 h^3 against sum_I |D-.u|^2 h^3; ratio estimates the domain constant."""

    lhs: float
    rhs: float

    @property
    def ratio(self) -> float:
        if self.rhs == 0.0:
            return 0.0 if self.lhs == 0.0 else float("inf")
        return self.lhs / self.rhs


def _mask_key(mask: DomainMask) -> str:
    digest = hashlib.sha1(np.packbits(mask.interior).tobytes()).hexdigest()[:12]
    return f"{mask.grid.dims}:{mask.grid.h:g}:{digest}"


@dataclass
class StabilityTracker:
    """Running max of StabilityGap.ratio per mask, owned by one run or study."""

    max_ratio: dict[str, float] = field(default_factory=dict)

    def record(self, mask: DomainMask, gap: StabilityGap) -> bool:
        key = _mask_key(mask)
        if not np.isfinite(gap.ratio) or gap.ratio <= self.max_ratio.get(key, -1.0):
            return False
        self.max_ratio[key] = gap.ratio
        logger.info(f"hhd stability ratio on mask {key}: running max {gap.ratio:.6g}")
        return True

    def get(self, mask: DomainMask) -> float | None:
        return self.max_ratio.get(_mask_key(mask))


def stability_gap(
    u: VectorField,
    result: HHDResult,
    mask: DomainMask,
    tracker: StabilityTracker | None = None,
) -> StabilityGap:
    ub = _base(u, mask)
    on_boundary = max(float(np.abs(c.values[mask.boundary]).max(initial=0.0)) for c in ub)
    if on_boundary > 0.0:
        raise PreconditionError(f"u must vanish on the discrete boundary (max |u| there = {on_boundary:.3e})")
    inner = mask.inner
    h3 = mask.grid.h ** 3
    diff = ub.stacked() - result.w.stacked()
    lhs = float(np.sum(diff[:, inner] ** 2)) * h3
    div_u = divergence(ub, "backward").values
    rhs = float(np.sum(div_u[inner] ** 2)) * h3
    gap = StabilityGap(lhs, rhs)
    if not np.isfinite(gap.lhs) or not np.isfinite(gap.rhs):
        raise SchemeInvariantError("stability gap is not finite")
    if tracker is not None:
        tracker.record(mask, gap)
    return gap
