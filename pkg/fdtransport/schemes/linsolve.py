"""Krylov solves on matrix-free operators: CG for the Poisson problem, GMRES for implicit steps."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg, gmres

from fdtransport.errors import ConfigError, SolverError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverSettings:
    """tolerance is relative to ||b||; max_iterations None means 1000 * N^(1/3)."""

    tolerance: float = 1e-10
    max_iterations: int | None = None
    restart: int = 50

    def __post_init__(self):
        if not 0 < self.tolerance < 1:
            raise ConfigError(f"solver tolerance must lie in (0, 1), got {self.tolerance}")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ConfigError(f"max_iterations must be positive, got {self.max_iterations}")
        if self.restart < 1:
            raise ConfigError(f"GMRES restart must be positive, got {self.restart}")

    def cap(self, n: int) -> int:
        if self.max_iterations is not None:
            return self.max_iterations
        return max(10, int(math.ceil(1000 * n ** (1.0 / 3.0))))


@dataclass
class SolveReport:
    x: np.ndarray
    iterations: int
    residual: float  # ||b - A x|| / ||b||


def _relative_residual(matvec, x: np.ndarray, b: np.ndarray) -> float:
    nb = float(np.linalg.norm(b))
    if nb == 0.0:
        return float(np.linalg.norm(matvec(x)))
    return float(np.linalg.norm(b - matvec(x)) / nb)


def solve_cg(
    matvec: Callable[[np.ndarray], np.ndarray],
    b: np.ndarray,
    settings: SolverSettings,
    what: str = "poisson",
) -> SolveReport:
    """Conjugate gradients for a symmetric positive definite operator."""
    n = b.size
    if n == 0 or not np.any(b):
        return SolveReport(np.zeros(n), 0, 0.0)
    op = LinearOperator((n, n), matvec=matvec, dtype=float)
    count = [0]

    def tick(xk):
        count[0] += 1

    cap = settings.cap(n)
    x, info = cg(op, b, rtol=settings.tolerance, atol=0.0, maxiter=cap, callback=tick)
    res = _relative_residual(matvec, x, b)
    if info != 0:
        raise SolverError(
            f"{what}: CG did not converge in {count[0]} iterations (cap {cap}), relative residual {res:.3e}",
            residual=res,
            iterations=count[0],
        )
    logger.debug(f"{what}: CG converged in {count[0]} iterations, residual {res:.3e}")
    return SolveReport(x, count[0], res)


def solve_gmres(
    matvec: Callable[[np.ndarray], np.ndarray],
    b: np.ndarray,
    settings: SolverSettings,
    x0: np.ndarray | None = None,
    what: str = "implicit step",
) -> SolveReport:
    """Restarted GMRES; iterations counts inner iterations."""
    n = b.size
    if n == 0 or not np.any(b):
        return SolveReport(np.zeros(n), 0, 0.0)
    op = LinearOperator((n, n), matvec=matvec, dtype=float)
    count = [0]

    def tick(rk):
        count[0] += 1

    cap = settings.cap(n)
    restart = min(settings.restart, n)
    outer = max(1, int(math.ceil(cap / restart)))
    x, info = gmres(
        op, b, x0=x0, rtol=settings.tolerance, atol=0.0, restart=restart,
        maxiter=outer, callback=tick, callback_type="pr_norm",
    )
    res = _relative_residual(matvec, x, b)
    if info != 0:
        raise SolverError(
            f"{what}: GMRES did not converge in {count[0]} iterations (cap {cap}), relative residual {res:.3e}",
            residual=res,
            iterations=count[0],
        )
    if count[0] >= cap:
        logger.warning(f"{what}: GMRES hit the iteration cap {cap}")
    return SolveReport(x, count[0], res)
