"""Tests for the discrete Helmholtz-Hodge projection."""

import numpy as np
import pytest


def _random_velocity(mask, seed: int = 3, region: str | None = None):
    from fdtransport.grid.field import VectorField
    rng = np.random.default_rng(seed)
    arrays = rng.standard_normal((3,) + mask.grid.dims)
    if region is not None:
        arrays = np.where(mask.region(region), arrays, 0.0)
    return VectorField.from_arrays(mask.grid, arrays)


class TestPoissonOperator:
    def test_matrix_matches_matvec(self, box_mask):
        from fdtransport.schemes.hhd import PoissonOperator, assemble_poisson
        op = PoissonOperator(box_mask)
        A = assemble_poisson(box_mask)
        x = np.random.default_rng(0).standard_normal(op.n)
        np.testing.assert_allclose(A @ x, op.matvec(x), rtol=1e-12, atol=1e-9)

    def test_symmetric_positive_definite(self):
        from fdtransport.grid.lattice import DomainMask, GridSpec
        from fdtransport.schemes.hhd import assemble_poisson
        grid = GridSpec(h=0.2, origin=(0, 0, 0), dims=(8, 8, 8))
        mask = DomainMask.box_mask(grid, (1, 1, 1), (6, 6, 6))
        A = assemble_poisson(mask).toarray()
        np.testing.assert_allclose(A, A.T)
        assert np.linalg.eigvalsh(A).min() > 0.0

    def test_empty_inner_raises(self):
        from fdtransport.errors import DomainError
        from fdtransport.grid.lattice import DomainMask, GridSpec
        from fdtransport.schemes.hhd import PoissonOperator
        grid = GridSpec(h=0.2, origin=(0, 0, 0), dims=(6, 6, 6))
        mask = DomainMask.box_mask(grid, (1, 1, 1), (2, 2, 2))
        with pytest.raises(DomainError):
            PoissonOperator(mask)


class TestProject:
    def test_divergence_free_on_inner(self, box_mask):
        from fdtransport.schemes.hhd import project
        result = project(_random_velocity(box_mask), box_mask)
        assert result.div_residual < 1e-6
        assert result.reconstruction_residual < 1e-12
        assert result.iterations > 0

    def test_w_vanishes_off_inner(self, box_mask):
        from fdtransport.schemes.hhd import project
        result = project(_random_velocity(box_mask), box_mask)
        w = result.w.stacked()
        assert np.all(w[:, ~box_mask.inner] == 0.0)
        assert np.all(result.phi.values[~box_mask.inner] == 0.0)

    def test_norm_bounds_and_orthogonality(self, box_mask):
        from fdtransport.schemes.hhd import project
        result = project(_random_velocity(box_mask), box_mask)
        assert result.norm_bounds_ok()
        assert result.w_sq <= result.u_sq
        assert result.grad_sq <= result.u_sq
        assert abs(result.orthogonality) < 1e-8 * result.u_sq
        # Pythagoras on I
        assert result.w_sq + result.grad_sq == pytest.approx(result.u_sq, rel=1e-8)

    def test_matches_dense_oracle(self, box_mask):
        from fdtransport.schemes.hhd import dense_project, project
        u = _random_velocity(box_mask, seed=11)
        a = project(u, box_mask)
        b = dense_project(u, box_mask)
        np.testing.assert_allclose(a.w.stacked(), b.w.stacked(), atol=1e-6)
        np.testing.assert_allclose(a.phi.values, b.phi.values, atol=1e-7)

    def test_solenoidal_input_is_fixed(self, box_mask, solenoidal):
        from fdtransport.schemes.hhd import project
        w = solenoidal(box_mask)
        result = project(w, box_mask)
        np.testing.assert_allclose(result.w.stacked(), w.stacked(), atol=1e-9)
        assert np.abs(result.phi.values).max() < 1e-9

    def test_gradient_input_is_removed(self, box_mask, random_field):
        from fdtransport.grid.operators import gradient
        from fdtransport.schemes.hhd import project
        phi0 = random_field(box_mask, seed=5, region="inner")
        result = project(gradient(phi0, "forward"), box_mask)
        assert np.abs(result.w.stacked()).max() < 1e-5
        np.testing.assert_allclose(result.phi.values, phi0.values, atol=1e-6)

    def test_idempotent(self, box_mask):
        from fdtransport.schemes.hhd import project
        once = project(_random_velocity(box_mask, seed=7), box_mask)
        twice = project(once.w, box_mask)
        np.testing.assert_allclose(twice.w.stacked(), once.w.stacked(), atol=1e-6)

    def test_zero_input(self, box_mask):
        from fdtransport.grid.field import VectorField
        from fdtransport.schemes.hhd import project
        result = project(VectorField.zeros(box_mask.grid), box_mask)
        assert result.iterations == 0
        assert result.w_sq == 0.0

    def test_solver_cap_raises(self, box_mask):
        from fdtransport.errors import SolverError, exit_code_for
        from fdtransport.schemes.hhd import project
        from fdtransport.schemes.linsolve import SolverSettings
        with pytest.raises(SolverError) as info:
            project(_random_velocity(box_mask), box_mask, SolverSettings(max_iterations=1))
        assert info.value.iterations is not None
        assert exit_code_for(info.value) == 3

    def test_dense_oracle_size_limit(self):
        from fdtransport.errors import PreconditionError
        from fdtransport.grid.lattice import DomainMask, GridSpec
        from fdtransport.schemes.hhd import dense_project
        grid = GridSpec(h=0.05, origin=(0, 0, 0), dims=(18, 18, 18))
        mask = DomainMask.box_mask(grid, (1, 1, 1), (16, 16, 16))
        with pytest.raises(PreconditionError):
            dense_project(_random_velocity(mask), mask)

    def test_write_vtk(self, box_mask, tmp_path):
        from fdtransport.schemes.hhd import project
        path = project(_random_velocity(box_mask), box_mask).write_vtk(tmp_path / "hhd.vtk")
        text = path.read_text()
        assert text.startswith("# vtk DataFile")
        assert "phi" in text and "grad_phi" in text


class TestStabilityGap:
    def test_ratio_recorded(self, box_mask):
        from fdtransport.schemes.hhd import StabilityTracker, project, stability_gap
        tracker = StabilityTracker()
        u = _random_velocity(box_mask, seed=21, region="inner")
        gap = stability_gap(u, project(u, box_mask), box_mask, tracker)
        assert gap.rhs > 0.0
        assert np.isfinite(gap.ratio)
        assert tracker.get(box_mask) == gap.ratio

    def test_trackers_are_independent(self, box_mask):
        from fdtransport.schemes.hhd import StabilityTracker, project, stability_gap
        first, second = StabilityTracker(), StabilityTracker()
        ratios = []
        for seed in (3, 5, 8):
            u = _random_velocity(box_mask, seed=seed, region="inner")
            ratios.append(stability_gap(u, project(u, box_mask), box_mask, first).ratio)
        assert first.get(box_mask) == max(ratios)
        assert second.get(box_mask) is None
        u = _random_velocity(box_mask, seed=3, region="inner")
        stability_gap(u, project(u, box_mask), box_mask, second)
        assert second.get(box_mask) == ratios[0]
        assert first.get(box_mask) == max(ratios)

    def test_untracked_call_leaves_tracker_alone(self, box_mask):
        from fdtransport.schemes.hhd import StabilityTracker, project, stability_gap
        tracker = StabilityTracker()
        u = _random_velocity(box_mask, seed=9, region="inner")
        stability_gap(u, project(u, box_mask), box_mask)
        assert tracker.max_ratio == {}

    def test_solenoidal_gap_is_zero(self, box_mask, solenoidal):
        from fdtransport.schemes.hhd import project, stability_gap
        w = solenoidal(box_mask, seed=4)
        gap = stability_gap(w, project(w, box_mask), box_mask)
        assert gap.lhs < 1e-16
        assert gap.rhs < 1e-16

    def test_requires_zero_on_boundary(self, box_mask):
        from fdtransport.errors import PreconditionError
        from fdtransport.schemes.hhd import project, stability_gap
        u = _random_velocity(box_mask, seed=2, region="interior")
        with pytest.raises(PreconditionError):
            stability_gap(u, project(u, box_mask), box_mask)
