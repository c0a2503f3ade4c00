"""Method-of-characteristics reference solution and an analytic sphere surface.

f(t, x) = f0(X(0, t, x)); derivatives of f are taken by central differences
of this composition, which is far smoother than anything the schemes resolve.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from fdtransport.errors import ConfigError, PreconditionError
from fdtransport.fields.averaging import ScalarFn, VelocitySampler
from fdtransport.grid.export import write_vtk_structured
from fdtransport.grid.field import ScalarField
from fdtransport.grid.lattice import GridSpec, Index
from fdtransport.presets.base import SphereSurface
from fdtransport.reference.flow import FlowMap

logger = logging.getLogger(__name__)

DEFAULT_FD_STEP = 2e-3
DEFAULT_SAMPLE = 20000


def _as_flow(v: VelocitySampler | FlowMap) -> FlowMap:
    return v if isinstance(v, FlowMap) else FlowMap(v=v)


def exact_solution(f0: ScalarFn, v: VelocitySampler | FlowMap, t: float, x) -> np.ndarray:
    """f0(X(0, t, x)) for points x of shape (..., 3)."""
    return ExactSolution(f0, _as_flow(v)).at_points(t, x)


@dataclass
class ExactSolution:
    f0: ScalarFn
    flow: FlowMap
    fd_step: float = DEFAULT_FD_STEP

    def at_points(self, t: float, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        back = self.flow(0.0, t, pts.reshape(-1, 3))
        vals = np.asarray(self.f0(back[:, 0], back[:, 1], back[:, 2]), dtype=float)
        return np.broadcast_to(vals, (len(back),)).reshape(pts.shape[:-1])

    def __call__(self, t: float, x1, x2, x3) -> np.ndarray:
        x1, x2, x3 = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float), np.asarray(x3, float))
        return self.at_points(t, np.stack([x1, x2, x3], axis=-1))

    def derivatives(self, t: float, points) -> tuple[np.ndarray, np.ndarray]:
        """(grad f of shape (k, 3), Hessian of shape (k, 3, 3)) at points (k, 3)."""
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        d = self.fd_step
        eye = np.eye(3) * d
        f_c = self.at_points(t, pts)
        f_p = np.stack([self.at_points(t, pts + eye[i]) for i in range(3)], axis=1)
        f_m = np.stack([self.at_points(t, pts - eye[i]) for i in range(3)], axis=1)
        grad = (f_p - f_m) / (2.0 * d)
        hess = np.empty((len(pts), 3, 3))
        for i in range(3):
            hess[:, i, i] = (f_p[:, i] - 2.0 * f_c + f_m[:, i]) / d ** 2
            for j in range(i + 1, 3):
                pp = self.at_points(t, pts + eye[i] + eye[j])
                pm = self.at_points(t, pts + eye[i] - eye[j])
                mp = self.at_points(t, pts - eye[i] + eye[j])
                mm = self.at_points(t, pts - eye[i] - eye[j])
                hess[:, i, j] = hess[:, j, i] = (pp - pm - mp + mm) / (4.0 * d * d)
        return grad, hess

    def field(self, t: float, grid: GridSpec, lo: Index = (0, 0, 0), shape=None) -> ScalarField:
        """Point samples of f(t, .) on a lattice window."""
        shape = shape or grid.dims
        x1, x2, x3 = grid.coords(lo, shape)
        return ScalarField(grid, self(t, x1, x2, x3), lo)

    def write_vtk(self, path: str | Path, t: float, grid: GridSpec, lo: Index = (0, 0, 0), shape=None) -> Path:
        f = self.field(t, grid, lo, shape)
        return write_vtk_structured(path, scalars={"exact": f}, title=f"exact solution t={t:.17g}")


def sample_nodes(member: np.ndarray, sample: int | None = DEFAULT_SAMPLE, seed: int = 0) -> np.ndarray:
    """Lattice indices (k, 3) of a boolean set, thinned deterministically to at most `sample`."""
    idx = np.argwhere(member)
    if sample is None or len(idx) <= sample:
        return idx
    rng = np.random.default_rng(seed)
    keep = np.sort(rng.choice(len(idx), size=sample, replace=False))
    return idx[keep]


def sup_error(g: ScalarField, exact: ExactSolution, t: float, nodes: np.ndarray) -> float:
    """max |g(x) - f(t, x)| over lattice nodes (k, 3) of the base window."""
    if len(nodes) == 0:
        return 0.0
    gb = g.window((0, 0, 0), g.grid.dims).values
    pts = np.asarray(g.grid.origin) + g.grid.h * nodes
    ref = exact.at_points(t, pts)
    return float(np.abs(gb[tuple(nodes.T)] - ref).max())


def l2_error(g: ScalarField, exact: ExactSolution, t: float, member: np.ndarray) -> float:
    """(sum_{member} |g - f(t, .)|^2 h^3)^(1/2) on the base window."""
    gb = g.window((0, 0, 0), g.grid.dims)
    x1, x2, x3 = g.grid.coords()
    pts = np.stack([x1[member], x2[member], x3[member]], axis=-1)
    diff = gb.values[member] - exact.at_points(t, pts)
    return float(np.sqrt(np.sum(diff ** 2) * g.grid.h ** 3))


def flow_jacobian_determinant(flow: FlowMap, t: float, points, step: float = 1e-4) -> np.ndarray:
    """det dX(t, 0, xi)/dxi by central differences; 1 for volume-preserving flows."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    jac = np.empty((len(pts), 3, 3))
    for j in range(3):
        e = np.zeros(3)
        e[j] = step
        jac[:, :, j] = (flow(t, 0.0, pts + e) - flow(t, 0.0, pts - e)) / (2.0 * step)
    return np.linalg.det(jac)


@dataclass
class SurfaceOracle:
    """Sphere {|x - c(t)| = r} carried by a flow that moves it rigidly.

    Valid when the sphere stays where the velocity is a rigid motion (the
    rotation preset's core). Outward normals point away from the centre,
    so the mean curvature with that orientation is -2/r.
    """

    surface: SphereSurface
    flow: FlowMap

    def center(self, t: float) -> np.ndarray:
        return self.flow(t, 0.0, np.asarray(self.surface.center, dtype=float).reshape(1, 3))[0]

    @property
    def radius(self) -> float:
        return float(self.surface.radius)

    def nearest(self, t: float, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        c = self.center(t)
        d = pts - c
        r = np.linalg.norm(d, axis=1)
        if np.any(r == 0.0):
            raise PreconditionError("nearest surface point undefined at the sphere centre")
        return c + self.radius * d / r[:, None]

    def distance(self, t: float, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        return np.abs(np.linalg.norm(pts - self.center(t), axis=1) - self.radius)

    def normal(self, t: float, points) -> np.ndarray:
        """Outward unit normal at the nearest surface point."""
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        d = pts - self.center(t)
        return d / np.linalg.norm(d, axis=1)[:, None]

    def curvature(self, t: float, points) -> np.ndarray:
        return np.full(len(np.asarray(points).reshape(-1, 3)), -2.0 / self.radius)

    def area(self) -> float:
        return 4.0 * math.pi * self.radius ** 2

    def surface_integral(self, phi: Callable, t: float, n_theta: int = 64, n_phi: int = 128) -> float:
        """Gauss-Legendre in the polar angle times the trapezoid rule in azimuth."""
        nodes, weights = np.polynomial.legendre.leggauss(n_theta)
        theta = 0.5 * math.pi * (nodes + 1.0)
        w_theta = 0.5 * math.pi * weights
        azim = 2.0 * math.pi * np.arange(n_phi) / n_phi
        th, az = np.meshgrid(theta, azim, indexing="ij")
        c, r = self.center(t), self.radius
        x1 = c[0] + r * np.sin(th) * np.cos(az)
        x2 = c[1] + r * np.sin(th) * np.sin(az)
        x3 = c[2] + r * np.cos(th)
        vals = np.broadcast_to(np.asarray(phi(x1, x2, x3), dtype=float), th.shape)
        integrand = vals * r * r * np.sin(th)
        return float(np.sum(w_theta[:, None] * integrand) * 2.0 * math.pi / n_phi)

    @classmethod
    def from_presets(cls, initial, initial_params: dict, level: float, flow: FlowMap) -> "SurfaceOracle":
        surface = initial.level_surface(initial_params, level)
        if surface is None:
            raise ConfigError(f"initial preset '{initial.name}' has no analytic level surface at {level:g}")
        return cls(surface=surface, flow=flow)


def hausdorff_to_surface(positions: np.ndarray, oracle: SurfaceOracle, t: float) -> float:
    """max over interface points of their distance to Gamma(t) (one-sided)."""
    positions = np.asarray(positions, dtype=float).reshape(-1, 3)
    if len(positions) == 0:
        return 0.0
    return float(oracle.distance(t, positions).max())


@dataclass
class GeometryErrors:
    hausdorff: float
    normal: float
    curvature: float
    points: int


def geometry_errors(interface, oracle: SurfaceOracle, t: float | None = None) -> GeometryErrors:
    """Errors of an interface with payload against the oracle at its nearest surface points."""
    t = interface.t if t is None else t
    pos = interface.positions()
    if len(pos) == 0:
        return GeometryErrors(0.0, 0.0, 0.0, 0)
    foot = oracle.nearest(t, pos)
    nerr = float(np.linalg.norm(interface.normals - oracle.normal(t, foot), axis=1).max())
    merr = float(np.abs(interface.curvature - oracle.curvature(t, foot)).max())
    return GeometryErrors(hausdorff_to_surface(pos, oracle, t), nerr, merr, len(pos))
