"""Tensor Gauss-Legendre rules for cell and space-time cell averages."""

from __future__ import annotations

from functools import lru_cache
from typing import Callable, Iterator

import numpy as np

from fdtransport.errors import ConfigError


@lru_cache(maxsize=16)
def gauss_legendre_unit(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes in [-1/2, 1/2] and weights summing to 1."""
    if order < 1:
        raise ConfigError(f"quadrature order must be >= 1, got {order}")
    nodes, weights = np.polynomial.legendre.leggauss(order)
    return nodes / 2.0, weights / 2.0


def cell_offsets(order: int, h: float) -> Iterator[tuple[float, float, float, float]]:
    """(dx1, dx2, dx3, weight) over the tensor rule on a cube of side h."""
    nodes, weights = gauss_legendre_unit(order)
    for a, wa in zip(nodes, weights):
        for b, wb in zip(nodes, weights):
            for c, wc in zip(nodes, weights):
                yield a * h, b * h, c * h, wa * wb * wc


def cell_average(
    fn: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray],
    x1: np.ndarray,
    x2: np.ndarray,
    x3: np.ndarray,
    h: float,
    order: int,
) -> np.ndarray:
    """(1/h^3) * integral of fn over C_h(x) at every node of the meshgrid."""
    total = np.zeros(np.shape(x1))
    for d1, d2, d3, w in cell_offsets(order, h):
        total += w * np.asarray(fn(x1 + d1, x2 + d2, x3 + d3), dtype=float)
    return total


def space_time_average(
    fn: Callable[[float, np.ndarray, np.ndarray, np.ndarray], np.ndarray],
    t0: float,
    tau: float,
    x1: np.ndarray,
    x2: np.ndarray,
    x3: np.ndarray,
    h: float,
    order: int,
    time_order: int | None = None,
) -> np.ndarray:
    """(1/tau h^3) * integral over [t0, t0 + tau] x C_h(x) of a vector field.

    fn(t, x1, x2, x3) returns an array of shape (3, ...). Result has shape
    (3,) + x1.shape.
    """
    t_nodes, t_weights = gauss_legendre_unit(time_order or order)
    total = np.zeros((3,) + np.shape(x1))
    for s, ws in zip(t_nodes, t_weights):
        t = t0 + tau * (s + 0.5)
        for d1, d2, d3, w in cell_offsets(order, h):
            total += (ws * w) * np.asarray(fn(t, x1 + d1, x2 + d2, x3 + d3), dtype=float)
    return total
