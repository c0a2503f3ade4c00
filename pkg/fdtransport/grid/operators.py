"""Discrete derivatives, divergences, norms and inner products on hZ^3.

All operators evaluate on the window of their input. Reads past the window
edge are 0 (zero extension), so a result is exact wherever the stencil stays
inside the window or where the field vanishes near the edge. A difference
at a node outside the window (D+ f at x0 - h e^i for the window corner x0,
say) is only produced when the window is grown first: pass pad=1 to the
difference operators, or call `ScalarField.padded` yourself.

Axes are numbered 1, 2, 3.
"""

from __future__ import annotations

import numpy as np

from fdtransport.grid.field import ScalarField, VectorField, shift


def _axis(axis: int) -> int:
    if axis not in (1, 2, 3):
        raise ValueError(f"axis must be 1, 2 or 3, got {axis!r}")
    return axis - 1


def _grown(f: ScalarField, pad: int) -> ScalarField:
    if pad < 0:
        raise ValueError(f"pad must be >= 0, got {pad}")
    return f.padded(pad) if pad else f


def forward_diff(f: ScalarField, axis: int, pad: int = 0) -> ScalarField:
    """D+_i f(x) = (f(x + h e^i) - f(x)) / h on the window grown by `pad` nodes."""
    a = _axis(axis)
    f = _grown(f, pad)
    return f.with_values((shift(f.values, a, 1) - f.values) / f.h)


def backward_diff(f: ScalarField, axis: int, pad: int = 0) -> ScalarField:
    """D-_i f(x) = (f(x) - f(x - h e^i)) / h"""
    a = _axis(axis)
    f = _grown(f, pad)
    return f.with_values((f.values - shift(f.values, a, -1)) / f.h)


def central_diff(f: ScalarField, axis: int, pad: int = 0) -> ScalarField:
    """D_i f(x) = (f(x + h e^i) - f(x - h e^i)) / 2h"""
    a = _axis(axis)
    f = _grown(f, pad)
    return f.with_values((shift(f.values, a, 1) - shift(f.values, a, -1)) / (2.0 * f.h))


def second_diff(f: ScalarField, axis: int, pad: int = 0) -> ScalarField:
    """D2_i f(x) = (f(x + h e^i) + f(x - h e^i) - 2 f(x)) / h^2"""
    a = _axis(axis)
    f = _grown(f, pad)
    v = f.values
    return f.with_values((shift(v, a, 1) + shift(v, a, -1) - 2.0 * v) / f.h ** 2)


def mixed_diff(f: ScalarField, i: int, j: int, pad: int = 0) -> ScalarField:
    """D-_i D+_j f, evaluated directly from shifts of f.

    For i == j this is D2_i f.
    """
    a, b = _axis(i), _axis(j)
    f = _grown(f, pad)
    if a == b:
        return second_diff(f, i)
    v = f.values
    # D+_j f(x) - D+_j f(x - e_i), both expanded on f
    fp = shift(v, b, 1)
    fm = shift(v, a, -1)
    fpm = shift(shift(v, a, -1), b, 1)
    return f.with_values((fp - v - fpm + fm) / f.h ** 2)


def gradient(f: ScalarField, kind: str = "forward", pad: int = 0) -> VectorField:
    op = {"forward": forward_diff, "backward": backward_diff, "central": central_diff}[kind]
    return VectorField(tuple(op(f, i, pad) for i in (1, 2, 3)))


def divergence(u: VectorField, kind: str = "backward", pad: int = 0) -> ScalarField:
    """sum_j D_j u_j with the chosen one-sided or central difference."""
    op = {"forward": forward_diff, "backward": backward_diff, "central": central_diff}[kind]
    parts = [op(u[j - 1], j, pad) for j in (1, 2, 3)]
    total = np.zeros(parts[0].shape)
    for part in parts:
        total += part.values
    return parts[0].with_values(total)

def _selection(f: ScalarField, over) -> np.ndarray:
    if over is None:
        return f.values.ravel()
    over = np.asarray(over, dtype=bool)
    if over.shape != f.shape:
        raise ValueError(f"index set shape {over.shape} does not match field window {f.shape}")
    return f.values[over]


def lp_norm(f: ScalarField, p: float, over=None) -> float:
    """(sum_{x in A} |f(x)|^p h^3)^(1/p); p = inf gives max |f| over A.

    `over` is a boolean array aligned with f's window (None: the whole window).
    An empty index set has norm 0.
    """
    if not (p == np.inf or p >= 1):
        raise ValueError(f"p must be >= 1 or inf, got {p}")
    vals = np.abs(_selection(f, over))
    if vals.size == 0:
        return 0.0
    if p == np.inf:
        return float(vals.max())
    h3 = f.h ** 3
    if p == 1:
        return float(np.sum(vals) * h3)
    if p == 2:
        return float(np.sqrt(np.sum(vals * vals) * h3))
    return float((np.sum(vals ** p) * h3) ** (1.0 / p))


def inner_product(f: ScalarField, g: ScalarField, over=None) -> float:
    """(f, g)_{2,A} = sum_{x in A} f(x) g(x) h^3"""
    if f.lo != g.lo or f.shape != g.shape:
        g = g.window(f.lo, f.shape)
    a = _selection(f, over)
    b = _selection(g, over)
    return float(np.sum(a * b) * f.h ** 3)


def vector_inner_product(u: VectorField, w: VectorField, over=None) -> float:
    return sum(inner_product(a, b, over) for a, b in zip(u, w))


def vector_sq_norm(u: VectorField, over=None) -> float:
    """sum_{x in A} |u(x)|^2 h^3"""
    return vector_inner_product(u, u, over)
