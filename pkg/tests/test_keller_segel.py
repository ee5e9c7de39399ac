"""Unit tests for the Keller–Segel IMEX integrator."""

import logging

import numpy as np
import pytest

from src.core.errors import BlowUpError, ShapeMismatchError
from src.core.grid import Field, Grid1D
from src.core.params import KellerSegelParams
from src.services.keller_segel import (
    chemotactic_divergence,
    keller_segel_initial_condition,
    keller_segel_step,
    logistic_source,
    neumann_boundary_flux,
    neumann_laplacian,
    total_mass,
)


def _zero_control(params):
    return Field.zeros(params.grid)


def test_homogeneous_state_is_exactly_stationary():
    """y = z = 1 without control stays bit-identical."""
    params = KellerSegelParams()
    state = Field(np.ones((2, params.n_points)), params.grid)
    for _ in range(5):
        state = keller_segel_step(state, _zero_control(params), params)
    assert np.array_equal(state.values, np.ones((2, params.n_points)))


def test_mass_follows_logistic_source():
    """dM/dt equals q * integral of y (1 - y) up to time-quadrature error."""
    params = KellerSegelParams(dt=0.0005, substeps=1)
    state = keller_segel_initial_condition(params, 4)
    control = _zero_control(params)

    drift = 0.0
    elapsed = 0.0
    for _ in range(1000):
        source_before = logistic_source(state, params)
        mass_before = total_mass(state)
        state = keller_segel_step(state, control, params)
        predicted = 0.5 * (source_before + logistic_source(state, params)) * params.dt
        drift += total_mass(state) - mass_before - predicted
        elapsed += params.dt

    assert abs(drift) / elapsed < 1e-6


def test_boundary_flux_vanishes_for_random_state():
    """The discrete Neumann fluxes of both components are zero."""
    params = KellerSegelParams()
    rng = np.random.default_rng(0)
    state = Field(1.0 + rng.random((2, params.n_points)), params.grid)
    assert np.max(np.abs(neumann_boundary_flux(state, params))) < 1e-14


def test_discrete_operators_conserve_the_integral():
    """Diffusion and chemotaxis only move mass around."""
    grid = Grid1D(length=10.0, n_points=200, periodic=False)
    rng = np.random.default_rng(1)
    y = 1.0 + rng.random(grid.n_points)
    z = rng.random(grid.n_points)

    scale = np.max(np.abs(neumann_laplacian(y, grid.dx))) * grid.length
    assert abs(grid.integrate(neumann_laplacian(y, grid.dx))) < 1e-12 * scale
    assert abs(grid.integrate(chemotactic_divergence(y, z, grid.dx))) < 1e-12 * scale


def test_self_convergence_is_second_order():
    """Observed temporal order of the IMEX scheme is close to two."""
    grid = Grid1D(length=10.0, n_points=50, periodic=False)
    x = grid.coordinates()
    y = 1.0 + 0.1 * np.cos(np.pi * x / grid.length)
    state = Field(np.stack([y, np.ones_like(y)]), grid)

    def run(substeps):
        params = KellerSegelParams(L=10.0, n_points=50, dt=0.2, substeps=substeps)
        return keller_segel_step(state, Field.zeros(grid), params).values

    reference = run(256)
    coarse = np.max(np.abs(run(8) - reference))
    fine = np.max(np.abs(run(16) - reference))
    order = np.log2(coarse / fine)

    assert 1.5 <= order <= 2.5


def test_control_only_enters_chemoattractant():
    """A forcing changes z immediately while y only reacts through chemotaxis."""
    params = KellerSegelParams(dt=0.01, substeps=1)
    state = Field(np.ones((2, params.n_points)), params.grid)
    control = Field.from_array(np.full(params.n_points, 0.5), params.grid)

    result = keller_segel_step(state, control, params)

    assert np.all(result.values[1] > 1.0)
    # A spatially uniform z carries no chemotactic flux, so y stays at the equilibrium.
    assert np.allclose(result.values[0], 1.0, atol=1e-12)


def test_negative_density_is_reported(caplog):
    """Negative cell densities are logged as a warning."""
    params = KellerSegelParams()
    values = np.ones((2, params.n_points))
    values[0] = -0.1
    state = Field(values, params.grid)

    with caplog.at_level(logging.WARNING):
        keller_segel_step(state, _zero_control(params), params)

    assert "Negative cell density" in caplog.text


def test_blow_up_is_detected():
    """Huge states abort the step."""
    params = KellerSegelParams()
    state = Field(np.full((2, params.n_points), 1e7), params.grid)
    with pytest.raises(BlowUpError):
        keller_segel_step(state, _zero_control(params), params)


def test_periodic_grid_is_refused():
    """Keller–Segel needs Neumann ends."""
    params = KellerSegelParams()
    grid = Grid1D(length=10.0, n_points=200)
    with pytest.raises(ShapeMismatchError):
        keller_segel_step(Field.zeros(grid, 2), Field.zeros(grid), params)


def test_initial_condition_is_seeded_and_positive():
    """y = z, close to one, reproducible per seed."""
    params = KellerSegelParams()
    first = keller_segel_initial_condition(params, 9)
    second = keller_segel_initial_condition(params, 9)

    assert np.array_equal(first.values, second.values)
    assert np.array_equal(first.values[0], first.values[1])
    assert np.min(first.values[0]) > 0.0
    assert np.sqrt(params.grid.mean((first.values[0] - 1.0) ** 2)) == pytest.approx(0.1, rel=1e-10)
