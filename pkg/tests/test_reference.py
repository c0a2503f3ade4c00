"""Tests for the characteristic flow, the exact-solution oracle and the error cascade."""

import math

import numpy as np
import pytest


def _rotation(omega: float = 1.0):
    from fdtransport.presets.builtin.rotation import RigidRotation
    preset = RigidRotation()
    params = {"omega": omega}
    return preset.sampler(params), preset.exact_flow(params)


def _points():
    return np.array([
        [0.3, 0.1, 0.0],
        [-0.2, 0.5, 0.3],
        [0.0, -0.6, -0.2],
        [0.55, 0.5, 0.1],  # in the cutoff shell
    ])


class TestFlowMap:
    def test_rk4_matches_closed_form(self):
        from fdtransport.reference.flow import FlowMap
        v, exact = _rotation()
        got = FlowMap(v=v, method="rk4", max_substep=1e-3)(0.5, 0.0, _points())
        np.testing.assert_allclose(got, exact(0.5, 0.0, _points()), atol=1e-9)

    def test_rk45_matches_closed_form(self):
        from fdtransport.reference.flow import flow
        v, exact = _rotation(omega=2.0)
        got = flow(v, 0.0, 0.7, _points(), method="rk45")
        np.testing.assert_allclose(got, exact(0.0, 0.7, _points()), atol=1e-7)

    def test_single_point_shape(self):
        from fdtransport.reference.flow import flow
        v, exact = _rotation()
        out = flow(v, 1.0, 0.0, [0.3, 0.0, 0.0], method="exact", exact=exact)
        assert out.shape == (3,)
        np.testing.assert_allclose(out, [0.3 * math.cos(1.0), 0.3 * math.sin(1.0), 0.0], atol=1e-14)

    def test_same_time_is_identity(self):
        from fdtransport.reference.flow import FlowMap
        v, _ = _rotation()
        pts = _points()
        np.testing.assert_array_equal(FlowMap(v=v)(0.3, 0.3, pts), pts)

    def test_for_run_substep(self):
        from fdtransport.reference.flow import FlowMap
        v, _ = _rotation()
        assert FlowMap.for_run(v, tau=0.01, T=1.0).max_substep == pytest.approx(1e-3)
        assert FlowMap.for_run(v, tau=0.002, T=1.0).max_substep == pytest.approx(5e-4)

    def test_invalid_method_and_missing_closed_form(self):
        from fdtransport.errors import ConfigError
        from fdtransport.reference.flow import FlowMap
        v, _ = _rotation()
        with pytest.raises(ConfigError):
            FlowMap(v=v, method="euler")
        with pytest.raises(ConfigError):
            FlowMap(v=v, method="exact")

    def test_escape_raises(self):
        from fdtransport.errors import DomainError
        from fdtransport.grid.lattice import Domain
        from fdtransport.reference.flow import FlowMap
        v, exact = _rotation()
        fm = FlowMap(v=v, method="exact", exact=exact, box=Domain.box((0, -1, -1), (1, 1, 1)), escape_margin=0.0)
        with pytest.raises(DomainError):
            fm(math.pi, 0.0, [[0.5, 0.0, 0.0]])

    def test_jacobian_is_one(self):
        from fdtransport.reference.flow import FlowMap
        from fdtransport.reference.oracle import flow_jacobian_determinant
        v, exact = _rotation()
        det = flow_jacobian_determinant(FlowMap(v=v, method="exact", exact=exact), 0.8, _points())
        np.testing.assert_allclose(det, 1.0, rtol=1e-6)


class TestExactSolution:
    def test_rotated_linear_datum(self):
        from fdtransport.reference.flow import FlowMap
        from fdtransport.reference.oracle import ExactSolution
        v, exact = _rotation()
        sol = ExactSolution(lambda x1, x2, x3: x1, FlowMap(v=v, method="exact", exact=exact))
        pts = _points()[:3]
        t = 0.4
        expected = pts[:, 0] * math.cos(t) + pts[:, 1] * math.sin(t)
        np.testing.assert_allclose(sol.at_points(t, pts), expected, atol=1e-14)

    def test_axial_datum_is_invariant(self):
        from fdtransport.reference.oracle import exact_solution
        v, _ = _rotation()
        pts = _points()
        np.testing.assert_allclose(exact_solution(lambda x1, x2, x3: x3, v, 0.9, pts), pts[:, 2], atol=1e-12)

    def test_derivatives_of_quadratic(self):
        from fdtransport.reference.flow import FlowMap
        from fdtransport.reference.oracle import ExactSolution
        v, _ = _rotation()
        sol = ExactSolution(lambda x1, x2, x3: x1 ** 2 + 3.0 * x2 * x3, FlowMap(v=v))
        grad, hess = sol.derivatives(0.0, [[0.2, -0.1, 0.4]])
        np.testing.assert_allclose(grad[0], [0.4, 1.2, -0.3], atol=1e-9)
        np.testing.assert_allclose(hess[0], [[2.0, 0.0, 0.0], [0.0, 0.0, 3.0], [0.0, 3.0, 0.0]], atol=1e-6)

    def test_errors_of_shifted_field(self, box_mask):
        from fdtransport.reference.flow import FlowMap
        from fdtransport.reference.oracle import ExactSolution, l2_error, sample_nodes, sup_error
        v, exact = _rotation()
        sol = ExactSolution(lambda x1, x2, x3: x1 * x2, FlowMap(v=v, method="exact", exact=exact))
        g = sol.field(0.3, box_mask.grid)
        nodes = sample_nodes(box_mask.interior, None)
        assert sup_error(g, sol, 0.3, nodes) < 1e-12
        shifted = g.with_values(g.values + 0.5)
        assert sup_error(shifted, sol, 0.3, nodes) == pytest.approx(0.5)
        count = int(box_mask.interior.sum())
        assert l2_error(shifted, sol, 0.3, box_mask.interior) == pytest.approx(0.5 * math.sqrt(count * 0.1 ** 3))

    def test_sample_nodes_is_deterministic(self, box_mask):
        from fdtransport.reference.oracle import sample_nodes
        a = sample_nodes(box_mask.interior, 50, seed=3)
        b = sample_nodes(box_mask.interior, 50, seed=3)
        assert a.shape == (50, 3)
        np.testing.assert_array_equal(a, b)
        assert len(sample_nodes(box_mask.interior, 5000)) == int(box_mask.interior.sum())

    def test_write_vtk(self, box_mask, tmp_path):
        from fdtransport.reference.flow import FlowMap
        from fdtransport.reference.oracle import ExactSolution
        v, _ = _rotation()
        sol = ExactSolution(lambda x1, x2, x3: x3, FlowMap(v=v))
        text = sol.write_vtk(tmp_path / "exact.vtk", 0.0, box_mask.grid).read_text()
        assert "exact" in text
        assert "DIMENSIONS 12 12 12" in text


class TestSurfaceOracle:
    def _oracle(self):
        from fdtransport.presets.builtin.initial_data import SphereLevelSet
        from fdtransport.reference.flow import FlowMap
        from fdtransport.reference.oracle import SurfaceOracle
        v, exact = _rotation()
        return SurfaceOracle.from_presets(SphereLevelSet(), {"radius": 0.4}, 1.0,
                                          FlowMap(v=v, method="exact", exact=exact))

    def test_center_moves_with_flow(self):
        oracle = self._oracle()
        assert oracle.radius == pytest.approx(0.4)
        np.testing.assert_allclose(oracle.center(0.0), [0.2, 0.0, 0.0])
        np.testing.assert_allclose(oracle.center(math.pi / 2), [0.0, 0.2, 0.0], atol=1e-14)

    def test_nearest_distance_normal(self):
        oracle = self._oracle()
        pts = np.array([[0.9, 0.0, 0.0], [0.2, 0.0, 0.1]])
        np.testing.assert_allclose(oracle.nearest(0.0, pts), [[0.6, 0.0, 0.0], [0.2, 0.0, 0.4]], atol=1e-14)
        np.testing.assert_allclose(oracle.distance(0.0, pts), [0.3, 0.3], atol=1e-14)
        np.testing.assert_allclose(oracle.normal(0.0, pts), [[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]], atol=1e-14)
        np.testing.assert_allclose(oracle.curvature(0.0, pts), -5.0)

    def test_nearest_undefined_at_center(self):
        from fdtransport.errors import PreconditionError
        with pytest.raises(PreconditionError):
            self._oracle().nearest(0.0, [[0.2, 0.0, 0.0]])

    def test_surface_integrals(self):
        oracle = self._oracle()
        r = oracle.radius
        assert oracle.surface_integral(lambda x1, x2, x3: 1.0, 0.3) == pytest.approx(oracle.area(), rel=1e-12)
        assert oracle.surface_integral(lambda x1, x2, x3: x3 ** 2, 0.3) == pytest.approx(
            4.0 * math.pi * r ** 4 / 3.0, rel=1e-10
        )

    def test_level_outside_core_has_no_surface(self):
        from fdtransport.errors import ConfigError
        from fdtransport.presets.builtin.initial_data import SphereLevelSet
        from fdtransport.reference.flow import FlowMap
        from fdtransport.reference.oracle import SurfaceOracle
        v, _ = _rotation()
        with pytest.raises(ConfigError):
            SurfaceOracle.from_presets(SphereLevelSet(), {}, 0.5, FlowMap(v=v))

    def test_geometry_errors_of_sampled_sphere(self):
        from fdtransport.grid.field import ScalarField
        from fdtransport.grid.lattice import GridSpec
        from fdtransport.levelset.geometry import compute_payload
        from fdtransport.levelset.interface import extract_interface
        from fdtransport.presets.builtin.initial_data import SphereLevelSet
        from fdtransport.reference.flow import FlowMap
        from fdtransport.reference.oracle import SurfaceOracle, geometry_errors
        v, exact = _rotation()
        preset = SphereLevelSet()
        oracle = SurfaceOracle.from_presets(preset, {}, 1.0, FlowMap(v=v, method="exact", exact=exact))
        h = 0.025
        grid = GridSpec.covering((-0.5, -0.7, -0.7), (0.9, 0.7, 0.7), h)
        g = ScalarField.from_function(grid, preset.function({}))
        iface = compute_payload(extract_interface(g, 1.0), g)
        errs = geometry_errors(iface, oracle, 0.0)
        assert errs.points == len(iface) > 0
        assert errs.hausdorff <= h + 1e-12
        assert errs.normal < 0.2
        assert errs.curvature < 0.5 * 2.0 / oracle.radius


class TestOrders:
    def test_fit_order_recovers_slope(self):
        from fdtransport.reference.cascade import fit_order
        hs = [0.1, 0.05, 0.025]
        assert fit_order(hs, [3.0 * h ** 2 for h in hs]) == pytest.approx(2.0)

    def test_fit_order_edge_cases(self):
        from fdtransport.errors import PreconditionError
        from fdtransport.reference.cascade import fit_order
        assert fit_order([0.1, 0.05], [1e-3, 0.0]) == float("inf")
        with pytest.raises(PreconditionError):
            fit_order([0.1], [1e-3])

    def test_cascade_orders_from_reports(self):
        import pandas as pd
        from fdtransport.reference.cascade import CascadeReport, fit_cascade_orders
        reports = [
            CascadeReport(h, pd.DataFrame({"n": [0, 1], "b0": [0.0, h], "b1": [0.0, h ** 0.5]}))
            for h in (0.1, 0.05)
        ]
        orders = fit_cascade_orders(reports)
        assert orders["b0"] == pytest.approx(1.0)
        assert orders["b1"] == pytest.approx(0.5)

    def test_growth_constants(self):
        from fdtransport.reference.cascade import fit_growth_constants
        fit = fit_growth_constants([0.0, 1e-3, 2e-3, 4e-3], tau=0.1, h=0.01, alpha=0.25)
        assert fit.ok
        assert fit.c1 == pytest.approx(5.0)
        assert fit.c2 == pytest.approx(1e-3 / (0.01 ** 0.25 * 0.1))


class TestCascade:
    def _run(self, T: float):
        from fdtransport.fields.timegrid import SchemeParams, TimeGrid
        from fdtransport.grid.lattice import Domain, DomainMask, GridSpec
        from fdtransport.presets.builtin.initial_data import GaussianBump
        from fdtransport.schemes.explicit import run_explicit
        h = 0.125
        grid = GridSpec.covering((-1, -1, -1), (1, 1, 1), h)
        mask = DomainMask.from_domain(Domain.box((-1, -1, -1), (1, 1, 1)), grid)
        v, exact = _rotation()
        f0 = GaussianBump().function({"center": (0.3, 0.0, 0.0)})
        params = SchemeParams.smooth(h, v_max=1.0)
        traj = run_explicit(f0, v, mask, params, TimeGrid(params.tau, T), quadrature_order=2, velocity_order=2)
        return traj, f0, v, exact

    def test_recursion_holds_exactly(self):
        from fdtransport.reference.cascade import derivative_recursion_check
        traj, *_ = self._run(T=0.08)
        assert not traj.window_capped
        defect = derivative_recursion_check(traj)
        assert defect.ok
        assert defect.scale > 0.0

    def test_recursion_needs_stored_steps(self):
        from fdtransport.errors import PreconditionError
        from fdtransport.reference.cascade import derivative_recursion_check
        traj, *_ = self._run(T=0.08)
        traj.states.pop(1)
        with pytest.raises(PreconditionError):
            derivative_recursion_check(traj)

    def test_report_has_one_row_per_step(self):
        from fdtransport.reference.cascade import error_cascade_report
        from fdtransport.reference.flow import FlowMap
        from fdtransport.reference.oracle import ExactSolution
        traj, f0, v, exact = self._run(T=0.08)
        sol = ExactSolution(f0, FlowMap(v=v, method="exact", exact=exact))
        report = error_cascade_report(traj, sol, sample=200)
        assert list(report.table["n"]) == list(range(traj.num_steps + 1))
        errs = report.max_errors()
        assert set(errs) == {"b0", "b1", "b2"}
        assert all(np.isfinite(e) and e >= 0.0 for e in errs.values())
        # g^0 is a cell average of f0, so the initial error is O(h^2)
        assert report.table["b0"].iloc[0] < 0.15

    def test_report_rejects_rough_data(self):
        from fdtransport.errors import PreconditionError
        from fdtransport.reference.cascade import error_cascade_report
        traj, f0, v, _ = self._run(T=0.08)
        with pytest.raises(PreconditionError):
            error_cascade_report(traj, None, smooth=False)

    def test_recorder_rejects_unknown_order(self, box_mask):
        from fdtransport.errors import PreconditionError
        from fdtransport.reference.cascade import CascadeRecorder
        with pytest.raises(PreconditionError):
            CascadeRecorder(exact=None, mask=box_mask, orders=(0, 3))
