"""Shared fixtures: small discrete domains and discretely solenoidal velocities."""

import numpy as np
import pytest


def _backward_curl(psi: np.ndarray, h: float) -> list[np.ndarray]:
    from fdtransport.grid.field import shift

    def dm(a, j):
        return (a - shift(a, j, -1)) / h

    return [
        dm(psi[2], 1) - dm(psi[1], 2),
        dm(psi[0], 2) - dm(psi[2], 0),
        dm(psi[1], 0) - dm(psi[0], 1),
    ]


@pytest.fixture
def box_mask():
    """Omega_h = 10^3 nodes on a 12^3 window with h = 0.1."""
    from fdtransport.grid.lattice import DomainMask, GridSpec
    grid = GridSpec(h=0.1, origin=(0.0, 0.0, 0.0), dims=(12, 12, 12))
    return DomainMask.box_mask(grid, (1, 1, 1), (10, 10, 10))


@pytest.fixture
def solenoidal():
    """Factory: w = backward curl of a random potential kept two layers off dOmega_h.

    D-.w vanishes identically and w is zero on dOmega_h and outside Omega_h.
    """

    def make(mask, seed: int = 0, scale: float = 1.0):
        from fdtransport.grid.field import VectorField
        from fdtransport.grid.lattice import discrete_boundary
        core = mask.inner & ~discrete_boundary(mask.inner)
        rng = np.random.default_rng(seed)
        psi = np.where(core, rng.standard_normal((3,) + mask.grid.dims), 0.0) * scale
        return VectorField.from_arrays(mask.grid, _backward_curl(psi, mask.grid.h))

    return make


@pytest.fixture
def random_field():
    """Factory: random ScalarField supported on a region of the mask."""

    def make(mask, seed: int = 1, region: str = "inner"):
        from fdtransport.grid.field import ScalarField
        rng = np.random.default_rng(seed)
        return ScalarField(mask.grid, np.where(mask.region(region), rng.standard_normal(mask.grid.dims), 0.0))

    return make
