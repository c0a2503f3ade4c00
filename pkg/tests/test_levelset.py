"""Tests for interface extraction, discrete geometry and refinement."""

import math

import numpy as np
import pytest

RADIUS = 0.5


def _paraboloid(h: float = 0.05, half: float = 0.7):
    """g = 1 + R^2 - |x|^2, whose level-1 set is the sphere |x| = R.

    Second and mixed differences of g are exact, so the discrete geometry
    has closed forms in terms of D+g = -(2x + h).
    """
    from fdtransport.grid.field import ScalarField
    from fdtransport.grid.lattice import GridSpec
    grid = GridSpec.covering((-half,) * 3, (half,) * 3, h)
    return ScalarField.from_function(grid, lambda x1, x2, x3: 1.0 + RADIUS ** 2 - (x1 ** 2 + x2 ** 2 + x3 ** 2))


def _unit_cone(h: float):
    """g = 2 - |x|; the level-1 set is the unit sphere."""
    from fdtransport.grid.field import ScalarField
    from fdtransport.grid.lattice import GridSpec
    grid = GridSpec.covering((-1.2,) * 3, (1.2,) * 3, h)
    return ScalarField.from_function(grid, lambda x1, x2, x3: 2.0 - np.sqrt(x1 ** 2 + x2 ** 2 + x3 ** 2))


def _brute_interface(g, c: float) -> set:
    lo = [l - 2 for l in g.lo]
    hi = [l + n + 2 for l, n in zip(g.lo, g.shape)]
    offsets = [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]
    plus = {
        (i, j, k)
        for i in range(lo[0], hi[0]) for j in range(lo[1], hi[1]) for k in range(lo[2], hi[2])
        if g.at((i, j, k)) > c
    }
    dil = set(plus)
    for p in plus:
        for o in offsets:
            dil.add((p[0] + o[0], p[1] + o[1], p[2] + o[2]))
    return {p for p in dil if any((p[0] + o[0], p[1] + o[1], p[2] + o[2]) not in dil for o in offsets)}


class TestExtractInterface:
    def test_single_node_gives_six_arms(self):
        from fdtransport.grid.field import ScalarField
        from fdtransport.grid.lattice import GridSpec
        from fdtransport.levelset.interface import extract_interface
        grid = GridSpec(h=0.1, origin=(0, 0, 0), dims=(5, 5, 5))
        vals = np.zeros((5, 5, 5))
        vals[2, 2, 2] = 3.0
        iface = extract_interface(ScalarField(grid, vals), 1.0)
        assert iface.index_set() == {(1, 2, 2), (3, 2, 2), (2, 1, 2), (2, 3, 2), (2, 2, 1), (2, 2, 3)}

    def test_matches_brute_force(self):
        from fdtransport.grid.field import ScalarField
        from fdtransport.grid.lattice import GridSpec
        from fdtransport.levelset.interface import extract_interface
        grid = GridSpec(h=0.1, origin=(0, 0, 0), dims=(7, 7, 7))
        g = ScalarField(grid, np.random.default_rng(3).random((6, 6, 6)), lo=(1, 0, 1))
        iface = extract_interface(g, 0.7, n=4, t=0.3)
        assert iface.index_set() == _brute_interface(g, 0.7)
        assert iface.n == 4 and iface.t == 0.3

    def test_empty_when_nothing_exceeds_level(self):
        from fdtransport.grid.field import ScalarField
        from fdtransport.grid.lattice import GridSpec
        from fdtransport.levelset.interface import extract_interface
        grid = GridSpec(h=0.1, origin=(0, 0, 0), dims=(4, 4, 4))
        iface = extract_interface(ScalarField(grid, np.full((4, 4, 4), 0.5)), 1.0)
        assert iface.is_empty
        assert len(iface.to_frame()) == 0

    def test_mask_restricts_super_level_set(self, box_mask):
        from fdtransport.grid.field import ScalarField
        from fdtransport.levelset.interface import super_level
        g = ScalarField(box_mask.grid, np.full(box_mask.grid.dims, 2.0))
        plus = super_level(g, 1.0, box_mask)
        np.testing.assert_array_equal(plus, box_mask.interior)

    def test_sphere_points_straddle_level(self):
        from fdtransport.levelset.interface import extract_interface
        g = _paraboloid()
        iface = extract_interface(g, 1.0)
        r = np.linalg.norm(iface.positions(), axis=1)
        assert np.all(r >= RADIUS - 1e-12)
        assert np.all(r <= RADIUS + math.sqrt(3) * g.h + 1e-12)

    def test_csv_columns(self, tmp_path):
        import pandas as pd
        from fdtransport.levelset.geometry import compute_payload
        from fdtransport.levelset.interface import INTERFACE_COLUMNS, extract_interface
        g = _paraboloid(h=0.1)
        iface = compute_payload(extract_interface(g, 1.0, n=2, t=0.5), g)
        frame = pd.read_csv(iface.write_csv(tmp_path / "iface.csv"))
        assert list(frame.columns) == INTERFACE_COLUMNS
        assert len(frame) == len(iface)
        assert set(frame["n"]) == {2}
        assert set(frame["axis"]) <= {1, 2, 3}


class TestGeometry:
    def test_payload_matches_closed_form(self):
        from fdtransport.levelset.geometry import compute_payload
        from fdtransport.levelset.interface import extract_interface
        g = _paraboloid()
        h = g.h
        iface = compute_payload(extract_interface(g, 1.0), g)
        grad = 2.0 * iface.positions() + h
        norm = np.linalg.norm(grad, axis=1)
        np.testing.assert_allclose(iface.normals, grad / norm[:, None], rtol=1e-8, atol=1e-10)
        np.testing.assert_allclose(iface.curvature, -4.0 / norm, rtol=1e-8)
        np.testing.assert_allclose(iface.dS, norm / np.abs(grad).max(axis=1) * h * h, rtol=1e-8)
        assert iface.degenerate == []

    def test_curvature_approximates_sphere(self):
        from fdtransport.levelset.geometry import compute_payload
        from fdtransport.levelset.interface import extract_interface
        g = _paraboloid(h=0.025)
        iface = compute_payload(extract_interface(g, 1.0), g)
        np.testing.assert_allclose(iface.curvature, -2.0 / RADIUS, rtol=0.15)

    def test_pointwise_functions_agree_with_payload(self):
        from fdtransport.levelset.geometry import area_element, compute_payload, curvature, normal
        from fdtransport.levelset.interface import extract_interface
        g = _paraboloid(h=0.1)
        iface = compute_payload(extract_interface(g, 1.0), g)
        y = tuple(int(v) for v in iface.points[0])
        np.testing.assert_allclose(normal(g, y), iface.normals[0])
        assert curvature(g, y) == pytest.approx(iface.curvature[0])
        ds, axis = area_element(g, y)
        assert ds == pytest.approx(iface.dS[0])
        assert axis == iface.axis[0]

    def test_inward_orientation_flips_normal(self):
        from fdtransport.levelset.geometry import curvature, normal
        from fdtransport.levelset.interface import extract_interface
        g = _paraboloid(h=0.1)
        y = tuple(int(v) for v in extract_interface(g, 1.0).points[0])
        np.testing.assert_allclose(normal(g, y, orient_outward=False), -normal(g, y))
        assert curvature(g, y, orient_outward=False) == pytest.approx(-curvature(g, y))

    def _plateau(self):
        from fdtransport.grid.field import ScalarField
        from fdtransport.grid.lattice import GridSpec
        grid = GridSpec(h=0.1, origin=(0, 0, 0), dims=(9, 9, 9))
        vals = np.zeros((9, 9, 9))
        vals[3:6, 3:6, 3:6] = 2.0
        return ScalarField(grid, vals)

    def test_zero_gradient_is_degenerate(self):
        from fdtransport.errors import DegenerateGeometryError, exit_code_for
        from fdtransport.levelset.geometry import normal
        with pytest.raises(DegenerateGeometryError) as info:
            normal(self._plateau(), (6, 4, 4))
        assert info.value.points == [(6, 4, 4)]
        assert exit_code_for(info.value) == 4

    def test_payload_drops_or_raises_on_degenerate_points(self):
        from fdtransport.errors import DegenerateGeometryError
        from fdtransport.levelset.geometry import compute_payload
        from fdtransport.levelset.interface import extract_interface
        g = self._plateau()
        iface = extract_interface(g, 1.0)
        out = compute_payload(iface, g)
        assert (6, 4, 4) in out.degenerate
        assert len(out) + len(out.degenerate) == len(iface)
        assert np.all(np.isfinite(out.curvature))
        with pytest.raises(DegenerateGeometryError):
            compute_payload(iface, g, strict=True)


class TestConnectivity:
    def test_unit_shift_is_connected(self):
        from fdtransport.grid.field import ScalarField
        from fdtransport.levelset.interface import check_connectivity, extract_interface
        g = _paraboloid(h=0.1)
        moved = ScalarField(g.grid, g.values, lo=(g.lo[0] + 1, g.lo[1], g.lo[2]))
        report = check_connectivity(extract_interface(g, 1.0, n=0), extract_interface(moved, 1.0, n=1))
        assert report.ok
        assert report.checked > 0

    def test_far_shift_is_not_connected(self):
        from fdtransport.grid.field import ScalarField
        from fdtransport.levelset.interface import check_connectivity, extract_interface
        g = _paraboloid(h=0.1)
        moved = ScalarField(g.grid, g.values, lo=(g.lo[0] + 3, g.lo[1], g.lo[2]))
        report = check_connectivity(extract_interface(g, 1.0), extract_interface(moved, 1.0))
        assert not report.ok
        assert len(report.missing) > 0


class TestRefine:
    @pytest.mark.parametrize("strategy,tol", [("axis", 0.08), ("greedy", 0.15)])
    def test_area_of_sphere(self, strategy, tol):
        from fdtransport.levelset.interface import extract_interface
        from fdtransport.levelset.refine import refine_interface, surface_integral
        g = _paraboloid(h=0.025)
        refined = refine_interface(extract_interface(g, 1.0), g, strategy=strategy)
        area = surface_integral(refined, lambda x1, x2, x3: 1.0)
        assert area == pytest.approx(4.0 * math.pi * RADIUS ** 2, rel=tol)

    def test_refined_points_are_a_subset(self):
        from fdtransport.levelset.interface import extract_interface
        from fdtransport.levelset.refine import refine_interface
        g = _paraboloid(h=0.1)
        iface = extract_interface(g, 1.0)
        refined = refine_interface(iface, g, strategy="axis")
        assert refined.refined
        assert refined.index_set() <= iface.index_set()
        assert len(refined) < len(iface)
        assert set(refined.axis.tolist()) == {1, 2, 3}

    def test_axis_strategy_is_single_valued(self):
        from fdtransport.levelset.geometry import gradients
        from fdtransport.levelset.interface import extract_interface
        from fdtransport.levelset.refine import refine_interface
        g = _paraboloid(h=0.1)
        refined = refine_interface(extract_interface(g, 1.0), g, strategy="axis")
        grad = gradients(g, refined.points)
        seen = set()
        for p, a, d in zip(refined.points, refined.axis, grad):
            others = tuple(int(p[k]) for k in range(3) if k != a - 1)
            key = (int(a), float(np.sign(d[a - 1])), others)
            assert key not in seen
            seen.add(key)

    def test_unknown_strategy(self):
        from fdtransport.errors import ConfigError
        from fdtransport.levelset.interface import extract_interface
        from fdtransport.levelset.refine import refine_interface
        g = _paraboloid(h=0.1)
        with pytest.raises(ConfigError):
            refine_interface(extract_interface(g, 1.0), g, strategy="random")

    def test_time_shifted_surface_integral(self):
        from fdtransport.levelset.interface import extract_interface
        from fdtransport.levelset.refine import refine_interface, surface_integral_error
        from fdtransport.presets.base import SphereSurface
        from fdtransport.presets.builtin.zero import ZeroVelocity
        from fdtransport.reference.flow import FlowMap
        from fdtransport.reference.oracle import SurfaceOracle
        g = _paraboloid(h=0.025)
        refined = refine_interface(extract_interface(g, 1.0), g, strategy="axis")
        oracle = SurfaceOracle(surface=SphereSurface(center=np.zeros(3), radius=RADIUS),
                               flow=FlowMap(v=ZeroVelocity().sampler()))
        area = 4.0 * math.pi * RADIUS ** 2

        def phi(t, x1, x2, x3):
            return (1.0 + t) * np.ones_like(x1)

        at_step = surface_integral_error(refined, phi, oracle, 0.0)
        shifted = surface_integral_error(refined, phi, oracle, 0.5)
        assert abs(at_step) < 0.2 * area
        assert shifted - at_step == pytest.approx(-0.5 * area, rel=1e-6)

    def test_surface_integral_needs_area_elements(self):
        from fdtransport.errors import ConfigError
        from fdtransport.levelset.interface import extract_interface
        from fdtransport.levelset.refine import surface_integral
        g = _paraboloid(h=0.1)
        with pytest.raises(ConfigError):
            surface_integral(extract_interface(g, 1.0), lambda x1, x2, x3: 1.0)


class TestRefinedAreaConvergence:
    """Static unit sphere: area and an odd integrand at h = 1/32 and 1/64."""

    @pytest.mark.slow
    @pytest.mark.parametrize("strategy", ["axis", "greedy"])
    def test_unit_sphere(self, strategy):
        from fdtransport.levelset.interface import extract_interface
        from fdtransport.levelset.refine import refine_interface, surface_integral
        exact = 4.0 * math.pi
        errors = []
        for h in (1.0 / 32.0, 1.0 / 64.0):
            g = _unit_cone(h)
            refined = refine_interface(extract_interface(g, 1.0), g, strategy=strategy)
            area = surface_integral(refined, lambda x1, x2, x3: 1.0)
            errors.append(abs(area - exact) / exact)
            odd = surface_integral(refined, lambda x1, x2, x3: x1)
            assert abs(odd) <= 1e-3 * area
        assert errors[1] < errors[0]
        assert errors[1] < 0.02


class TestSphereGeometryConvergence:
    """Level-1 set of the translated sphere preset (radius 0.5) at t = 0."""

    def _errors(self, h: float):
        from fdtransport.grid.field import ScalarField
        from fdtransport.grid.lattice import GridSpec
        from fdtransport.levelset.geometry import compute_payload
        from fdtransport.levelset.interface import extract_interface
        from fdtransport.presets.builtin.initial_data import SphereLevelSet
        from fdtransport.presets.builtin.zero import ZeroVelocity
        from fdtransport.reference.flow import FlowMap
        from fdtransport.reference.oracle import SurfaceOracle, geometry_errors
        preset = SphereLevelSet()
        params = {"center": (0.2, 0.0, 0.0), "radius": RADIUS}
        grid = GridSpec.covering((-0.5, -0.7, -0.7), (0.9, 0.7, 0.7), h)
        g = ScalarField.from_function(grid, preset.function(params))
        iface = compute_payload(extract_interface(g, 1.0), g)
        oracle = SurfaceOracle.from_presets(preset, params, 1.0, FlowMap(v=ZeroVelocity().sampler()))
        return geometry_errors(iface, oracle, 0.0), iface

    @pytest.mark.slow
    def test_errors_decrease_with_h(self):
        from fdtransport.reference.cascade import fit_order
        hs = [1.0 / 32.0, 1.0 / 64.0]
        coarse, fine = (self._errors(h)[0] for h in hs)
        for name in ("hausdorff", "normal", "curvature"):
            a, b = getattr(coarse, name), getattr(fine, name)
            assert 0.0 < b < a, name
            # order >= alpha - 1/4 with the default alpha = 1/4
            assert fit_order(hs, [a, b]) >= 0.0
        assert fine.hausdorff < 1.0 / 64.0

    @pytest.mark.slow
    def test_curvature_near_minus_two_over_r(self):
        _, iface = self._errors(1.0 / 64.0)
        exact = -2.0 / RADIUS
        assert len(iface) > 0
        assert np.mean(np.abs(iface.curvature - exact)) <= 0.1 * abs(exact)
        assert np.all(iface.curvature < 0.0)
