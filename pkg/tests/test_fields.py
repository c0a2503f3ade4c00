"""Tests for quadrature, averaging, time grids, truncation and tabulated inputs."""

import math

import numpy as np
import pandas as pd
import pytest


def _grid(h: float = 0.25, n: int = 9, origin=(-1.0, -1.0, -1.0)):
    from fdtransport.grid.lattice import GridSpec
    return GridSpec(h=h, origin=origin, dims=(n, n, n))


def _constant_sampler(c=(1.0, 2.0, 3.0), steady: bool = True):
    from fdtransport.fields.averaging import VelocitySampler

    def fn(t, x1, x2, x3):
        return np.stack([np.full(np.shape(x1), c[0]), np.full(np.shape(x1), c[1]), np.full(np.shape(x1), c[2])])

    return VelocitySampler(fn=fn, steady=steady, name="constant")


class TestQuadrature:
    def test_weights_sum_to_one(self):
        from fdtransport.fields.quadrature import gauss_legendre_unit
        for order in (1, 2, 5):
            nodes, weights = gauss_legendre_unit(order)
            assert weights.sum() == pytest.approx(1.0)
            assert np.all(np.abs(nodes) < 0.5)

    def test_rejects_order_zero(self):
        from fdtransport.errors import ConfigError
        from fdtransport.fields.quadrature import gauss_legendre_unit
        with pytest.raises(ConfigError):
            gauss_legendre_unit(0)

    def test_cell_average_of_square(self):
        from fdtransport.fields.quadrature import cell_average
        h = 0.2
        x = np.array([0.0, 0.3, -1.1])
        zeros = np.zeros(3)
        avg = cell_average(lambda a, b, c: a ** 2, x, zeros, zeros, h, order=2)
        np.testing.assert_allclose(avg, x ** 2 + h ** 2 / 12.0, rtol=1e-13)

    def test_space_time_average_of_time(self):
        from fdtransport.fields.quadrature import space_time_average

        def fn(t, x1, x2, x3):
            return np.stack([np.full(np.shape(x1), t), x1, np.zeros(np.shape(x1))])

        x = np.array([0.5, 1.0])
        zeros = np.zeros(2)
        avg = space_time_average(fn, 0.3, 0.1, x, zeros, zeros, h=0.1, order=2)
        np.testing.assert_allclose(avg[0], 0.35, rtol=1e-13)
        np.testing.assert_allclose(avg[1], x, rtol=1e-13)
        np.testing.assert_allclose(avg[2], 0.0)


class TestTimeGrid:
    def test_num_steps_exact_division(self):
        from fdtransport.fields.timegrid import TimeGrid
        assert TimeGrid(tau=0.1, T=1.0).num_steps == 10

    def test_num_steps_floor(self):
        from fdtransport.fields.timegrid import TimeGrid
        tg = TimeGrid(tau=0.1, T=1.05)
        assert tg.num_steps == 10
        assert tg.step_of(0.35) == 3
        assert len(tg.times()) == 11

    def test_rejects_bad_tau(self):
        from fdtransport.errors import ConfigError
        from fdtransport.fields.timegrid import TimeGrid
        with pytest.raises(ConfigError):
            TimeGrid(tau=0.0, T=1.0)
        with pytest.raises(ConfigError):
            TimeGrid(tau=0.1, T=-1.0)


class TestSchemeParams:
    def test_scaled_tau(self):
        from fdtransport.fields.timegrid import SchemeParams
        p = SchemeParams.scaled(1e-3, 0.25, 0.625)
        assert p.tau == pytest.approx(1e-3 ** 1.75)
        assert p.truncation_level == pytest.approx(1e-3 ** -0.625)
        assert p.courant == pytest.approx(p.tau / 2e-3)

    def test_smooth_power_branch(self):
        from fdtransport.fields.timegrid import SchemeParams
        p = SchemeParams.smooth(0.1, v_max=1.0)
        assert p.tau_branch == "power"
        assert p.tau == pytest.approx(0.1 ** 1.75)
        assert math.isinf(p.truncation_level)

    def test_smooth_hyperbolic_branch(self):
        from fdtransport.fields.timegrid import CFL_LIMIT, SchemeParams
        p = SchemeParams.smooth(0.1, v_max=10.0)
        assert p.tau_branch == "hyperbolic"
        assert p.tau == pytest.approx(CFL_LIMIT * 0.1 / 10.0)
        # largest coefficient weight stays within 1/7
        assert p.courant * 10.0 <= 1.0 / 7.0 + 1e-15


class TestAveraging:
    def test_constant_initial(self):
        from fdtransport.fields.averaging import average_initial
        grid = _grid()
        g0 = average_initial(lambda a, b, c: np.full(np.shape(a), 2.5), grid, 2)
        np.testing.assert_allclose(g0.values, 2.5)

    def test_initial_rejects_nan(self):
        from fdtransport.errors import DataError
        from fdtransport.fields.averaging import average_initial
        grid = _grid()
        with pytest.raises(DataError):
            average_initial(lambda a, b, c: np.where(a > 0.5, np.nan, 0.0), grid, 2)

    def test_initial_cut_to_domain(self):
        from fdtransport.fields.averaging import average_initial
        from fdtransport.grid.lattice import Domain
        grid = _grid()
        g0 = average_initial(lambda a, b, c: np.ones(np.shape(a)), grid, 2, domain=Domain.ball((0, 0, 0), 0.5))
        assert g0.at(grid.nearest_index((0.0, 0.0, 0.0))) == pytest.approx(1.0)
        assert g0.at(grid.nearest_index((1.0, 1.0, 1.0))) == 0.0

    def test_velocity_constant_without_mask(self):
        from fdtransport.fields.averaging import average_velocity
        from fdtransport.fields.timegrid import TimeGrid
        grid = _grid()
        u = average_velocity(_constant_sampler(), grid, TimeGrid(0.1, 1.0), 3, 2)
        for j, c in enumerate((1.0, 2.0, 3.0)):
            np.testing.assert_allclose(u[j].values, c)

    def test_velocity_vanishes_off_mask(self):
        from fdtransport.fields.averaging import average_velocity
        from fdtransport.fields.timegrid import TimeGrid
        from fdtransport.grid.lattice import Domain, DomainMask
        grid = _grid()
        mask = DomainMask.from_domain(Domain.box((-0.6, -0.6, -0.6), (0.6, 0.6, 0.6)), grid)
        u = average_velocity(_constant_sampler(), grid, TimeGrid(0.1, 1.0), 0, 2, mask)
        vals = u.window((0, 0, 0), grid.dims).stacked()
        assert np.all(vals[:, ~mask.interior] == 0.0)
        np.testing.assert_allclose(vals[1][mask.interior], 2.0)

    def test_velocity_rejects_step_out_of_range(self):
        from fdtransport.errors import PreconditionError
        from fdtransport.fields.averaging import average_velocity
        from fdtransport.fields.timegrid import TimeGrid
        with pytest.raises(PreconditionError):
            average_velocity(_constant_sampler(), _grid(), TimeGrid(0.1, 1.0), 10)

    def test_steady_velocity_averaged_once(self):
        from fdtransport.fields.averaging import StepVelocities
        from fdtransport.fields.timegrid import TimeGrid
        steps = StepVelocities(_constant_sampler(), _grid(), TimeGrid(0.1, 1.0), 2)
        assert steps(0) is steps(5)

    def test_unsteady_velocity_per_step(self):
        from fdtransport.fields.averaging import StepVelocities, VelocitySampler
        from fdtransport.fields.timegrid import TimeGrid

        def fn(t, x1, x2, x3):
            return np.stack([np.full(np.shape(x1), t), np.zeros(np.shape(x1)), np.zeros(np.shape(x1))])

        steps = StepVelocities(VelocitySampler(fn=fn), _grid(), TimeGrid(0.1, 1.0), 2)
        np.testing.assert_allclose(steps(2)[0].values, 0.25, rtol=1e-12)
        np.testing.assert_allclose(steps(7)[0].values, 0.75, rtol=1e-12)

    def test_sampler_support(self):
        from fdtransport.fields.averaging import VelocitySampler
        from fdtransport.grid.lattice import Domain
        v = VelocitySampler(fn=_constant_sampler().fn, support=Domain.ball((0, 0, 0), 0.5))
        pts = np.array([[0.0, 0.0, 0.0], [0.9, 0.0, 0.0]])
        out = v.at_points(0.0, pts)
        np.testing.assert_allclose(out[0], [1.0, 2.0, 3.0])
        np.testing.assert_allclose(out[1], 0.0)

    def test_sampled_data_trilinear(self):
        from fdtransport.fields.averaging import SampledData
        axes = tuple(np.linspace(-1.0, 1.0, 5) for _ in range(3))
        x1, x2, x3 = np.meshgrid(*axes, indexing="ij")
        data = SampledData(axes, 1.0 + x1 - 2.0 * x2 + 0.5 * x3)
        assert data(0.1, 0.2, -0.3) == pytest.approx(1.0 + 0.1 - 0.4 - 0.15)
        assert data(2.0, 0.0, 0.0) == 0.0


class TestTruncation:
    def test_clamps_and_reports_sets(self):
        from fdtransport.fields.truncation import truncate_velocity
        from fdtransport.grid.field import VectorField
        grid = _grid(n=4)
        a = np.zeros((4, 4, 4))
        a[1, 1, 1], a[2, 2, 2], a[3, 3, 3] = 20.0, -30.0, 5.0
        u = VectorField.from_arrays(grid, [a, np.zeros_like(a), np.zeros_like(a)])
        ut, sets = truncate_velocity(u, h=0.01, beta=0.5)
        assert ut[0].values[1, 1, 1] == pytest.approx(10.0)
        assert ut[0].values[2, 2, 2] == pytest.approx(-10.0)
        assert ut[0].values[3, 3, 3] == 5.0
        assert sets[0].sum() == 2
        assert not sets[1].any()

    def test_neighbourhood_along_axis(self):
        from fdtransport.fields.truncation import neighbourhood
        hit = np.zeros((5, 5, 5), dtype=bool)
        hit[2, 2, 2] = True
        near = neighbourhood(hit, 1)
        assert near.sum() == 3
        assert near[2, 1, 2] and near[2, 3, 2]

    def test_measure_report_counts(self):
        from fdtransport.fields.truncation import truncated_measure_report
        hit = np.zeros((5, 5, 5), dtype=bool)
        hit[1, 1, 1] = True
        none = np.zeros_like(hit)
        report = truncated_measure_report([(hit, none, none), (hit, hit, none)], tau=0.01, h=0.1, beta=0.6,
                                          norms=None)
        assert report.steps == 2
        assert report.measure == pytest.approx(3 * 0.1 ** 3 * 0.01)
        assert report.neighbourhood_ok

    def test_velocity_norms_of_zero_field(self):
        from fdtransport.fields.averaging import VelocitySampler
        from fdtransport.fields.truncation import velocity_norms
        from fdtransport.grid.lattice import Domain
        norms = velocity_norms(VelocitySampler.zero(), Domain.box((-1, -1, -1), (1, 1, 1)), 0.25, 1.0)
        assert norms.m1 == 0.0
        assert norms.fine_spacing <= 0.25 / 4 + 1e-12

    def test_velocity_norms_of_linear_field(self):
        from fdtransport.fields.averaging import VelocitySampler
        from fdtransport.fields.truncation import velocity_norms
        from fdtransport.grid.lattice import Domain

        def fn(t, x1, x2, x3):
            return np.stack([x2, np.zeros(np.shape(x1)), np.zeros(np.shape(x1))])

        norms = velocity_norms(VelocitySampler(fn=fn, steady=True), Domain.box((0, 0, 0), (1, 1, 1)), 0.1, 2.0)
        # |grad v1| = 1 on the unit cube over T = 2
        assert norms.grad_l2l2[0] == pytest.approx(math.sqrt(2.0), rel=0.1)
        assert norms.linf_l2[0] == pytest.approx(math.sqrt(1.0 / 3.0), rel=0.1)
        assert norms.m1_components[1] == 0.0


class TestTabulatedVelocity:
    def _write(self, tmp_path, times=(0.0, 1.0)):
        from fdtransport.fields.averaging import VelocitySampler
        from fdtransport.fields.tabulated import write_tabulated_velocity

        def fn(t, x1, x2, x3):
            return np.stack([x1 + t, 2.0 * x2, np.full(np.shape(x1), -1.0)])

        path = tmp_path / "v.csv"
        write_tabulated_velocity(path, VelocitySampler(fn=fn), (-1.0, -1.0, -1.0), 0.5, (5, 5, 5), times)
        return path

    def test_linear_field_interpolates_exactly(self, tmp_path):
        from fdtransport.fields.tabulated import read_tabulated_velocity
        table = read_tabulated_velocity(self._write(tmp_path))
        assert not table.steady
        v = table(0.25, 0.3, -0.2, 0.1)
        np.testing.assert_allclose(v, [0.55, -0.4, -1.0], rtol=1e-12, atol=1e-14)

    def test_time_clipped_and_zero_outside_box(self, tmp_path):
        from fdtransport.fields.tabulated import read_tabulated_velocity
        table = read_tabulated_velocity(self._write(tmp_path))
        np.testing.assert_allclose(table(5.0, 0.0, 0.0, 0.0), [1.0, 0.0, -1.0], atol=1e-14)
        np.testing.assert_allclose(table(0.5, 1.5, 0.0, 0.0), 0.0)

    def test_steady_table(self, tmp_path):
        from fdtransport.fields.tabulated import read_tabulated_velocity
        table = read_tabulated_velocity(self._write(tmp_path, times=(0.0,)))
        assert table.steady
        sampler = table.sampler()
        assert sampler.steady and not sampler.smooth
        np.testing.assert_allclose(sampler(3.0, 0.5, 0.5, 0.5), [0.5, 1.0, -1.0], atol=1e-14)

    def test_header_required(self, tmp_path):
        from fdtransport.errors import DataError
        from fdtransport.fields.tabulated import parse_header
        with pytest.raises(DataError):
            parse_header("t,i,j,k,v1,v2,v3")
        with pytest.raises(DataError):
            parse_header("# origin=0,0,0 spacing=0.1")
        meta = parse_header("# origin=0,0,0 spacing=0.1 dims=3,4,5")
        assert meta["dims"] == (3, 4, 5)

    def test_missing_rows_rejected(self, tmp_path):
        from fdtransport.errors import DataError
        from fdtransport.fields.tabulated import read_tabulated_velocity
        path = self._write(tmp_path)
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[:-1]) + "\n")
        with pytest.raises(DataError):
            read_tabulated_velocity(path)

    def test_nonfinite_rejected(self):
        from fdtransport.errors import DataError
        from fdtransport.fields.tabulated import TabulatedVelocity
        values = np.zeros((1, 2, 2, 2, 3))
        values[0, 1, 1, 1, 2] = np.inf
        with pytest.raises(DataError):
            TabulatedVelocity((0, 0, 0), 1.0, (2, 2, 2), [0.0], values)


class TestSampledInitial:
    def _frame(self):
        axes = np.linspace(0.0, 1.0, 3)
        x1, x2, x3 = np.meshgrid(axes, axes, axes, indexing="ij")
        return pd.DataFrame({
            "x": x1.ravel(), "y": x2.ravel(), "z": x3.ravel(), "value": (x1 + x2 * x3).ravel(),
        })

    def test_reads_regular_grid(self, tmp_path):
        from fdtransport.fields.tabulated import read_sampled_initial
        path = tmp_path / "f0.csv"
        self._frame().sample(frac=1.0, random_state=1).to_csv(path, index=False)
        data = read_sampled_initial(path)
        assert data(1.0, 0.5, 1.0) == pytest.approx(1.5)
        assert data(0.25, 0.0, 0.0) == pytest.approx(0.25)

    def test_incomplete_grid_rejected(self, tmp_path):
        from fdtransport.errors import DataError
        from fdtransport.fields.tabulated import read_sampled_initial
        path = tmp_path / "f0.csv"
        self._frame().iloc[1:].to_csv(path, index=False)
        with pytest.raises(DataError):
            read_sampled_initial(path)
