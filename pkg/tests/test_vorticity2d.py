"""Unit tests for the 2D vorticity transport solver."""

# pylint: disable=redefined-outer-name
import warnings

import numpy as np
import pytest

from src.core.errors import ShapeMismatchError
from src.core.grid import Field, Grid2D
from src.core.params import Vorticity2dParams
from src.services.vorticity2d import (
    decaying_turbulence_ic,
    enstrophy,
    kinetic_energy,
    reynolds_number,
    velocity,
    vorticity2d_step,
)


@pytest.fixture
def params():
    """Coarse box for fast tests."""
    return Vorticity2dParams(n_grid=32, Re=500.0)


def test_taylor_green_decays_exponentially():
    """cos(x) cos(y) is an exact solution decaying as exp(-2 t / Re)."""
    params = Vorticity2dParams(n_grid=32, Re=10.0)
    grid = params.grid
    x = grid.coordinates()
    initial = np.cos(x)[:, None] * np.cos(x)[None, :]
    state = Field.from_array(initial, grid)
    zero = Field.zeros(grid)

    steps = int(round(1.0 / params.dt))
    for _ in range(steps):
        state = vorticity2d_step(state, zero, params)

    expected = initial * np.exp(-2.0 / params.Re)
    assert np.max(np.abs(state.values[0] - expected)) / np.max(np.abs(expected)) < 1e-3


def test_energy_never_increases_without_forcing(params):
    """Viscous decay makes kinetic energy monotone."""
    state = decaying_turbulence_ic(params, 0)
    zero = Field.zeros(params.grid)
    energies = [kinetic_energy(state)]
    for _ in range(10):
        state = vorticity2d_step(state, zero, params)
        energies.append(kinetic_energy(state))

    assert all(later <= earlier * (1.0 + 1e-12) for earlier, later in zip(energies, energies[1:]))
    assert energies[-1] < energies[0]


def test_rest_state_stays_at_rest(params):
    """Zero vorticity without forcing is stationary."""
    zero = Field.zeros(params.grid)
    assert np.array_equal(vorticity2d_step(zero, zero, params).values, zero.values)


def test_translational_equivariance(params):
    """Shift, step, shift back equals stepping directly."""
    state = decaying_turbulence_ic(params, 2)
    rng = np.random.default_rng(3)
    control = Field.from_array(0.1 * rng.standard_normal(params.grid.shape), params.grid)

    direct = vorticity2d_step(state, control, params)
    shifted = vorticity2d_step(state.shifted((3, 5)), control.shifted((3, 5)), params).shifted((-3, -5))

    scale = np.max(np.abs(direct.values))
    assert np.max(np.abs(direct.values - shifted.values)) / scale < 1e-10


def test_initial_condition_statistics(params):
    """Zero mean, seeded, and its measured Reynolds number matches the parameter."""
    first = decaying_turbulence_ic(params, 8)
    second = decaying_turbulence_ic(params, 8)

    assert np.array_equal(first.values, second.values)
    assert abs(np.mean(first.values)) < 1e-12
    assert reynolds_number(first, params) == pytest.approx(params.Re, rel=0.05)


def test_velocity_is_divergence_free(params):
    """The streamfunction velocity has zero spectral divergence."""
    state = decaying_turbulence_ic(params, 1)
    u, v = velocity(state)
    n = params.n_grid
    k = np.fft.fftfreq(n, d=1.0 / n)
    divergence = np.fft.ifft2(1j * k[:, None] * np.fft.fft2(u) + 1j * k[None, :] * np.fft.fft2(v)).real
    assert np.max(np.abs(divergence)) < 1e-10 * np.max(np.abs(u))


def test_enstrophy_of_taylor_green():
    """<cos(x)^2 cos(y)^2> = 1/4."""
    grid = Grid2D(n_points=32)
    x = grid.coordinates()
    state = Field.from_array(np.cos(x)[:, None] * np.cos(x)[None, :], grid)
    assert enstrophy(state) == pytest.approx(0.25, rel=1e-12)


def test_grid_must_match_parameters(params):
    """A state at another resolution is refused."""
    grid = Grid2D(n_points=64)
    with pytest.raises(ShapeMismatchError):
        vorticity2d_step(Field.zeros(grid), Field.zeros(grid), params)


def test_self_convergence_is_fourth_order():
    """Halving the inner step shrinks the error against a fine reference by about 2^4."""
    state = decaying_turbulence_ic(Vorticity2dParams(n_grid=32), 0)
    zero = Field.zeros(state.grid)

    def run(substeps):
        params = Vorticity2dParams(n_grid=32, dt=0.01, substeps=substeps)
        current = state
        for _ in range(25):
            current = vorticity2d_step(current, zero, params)
        return current.values

    reference = run(128)
    coarse = np.max(np.abs(run(8) - reference))
    fine = np.max(np.abs(run(16) - reference))

    assert fine > 0.0
    assert np.log2(coarse / fine) == pytest.approx(4.0, abs=0.5)


def test_step_is_deterministic(params):
    """Identical inputs give bit-identical outputs."""
    state = decaying_turbulence_ic(params, 4)
    rng = np.random.default_rng(5)
    control = Field.from_array(0.1 * rng.standard_normal(params.grid.shape), params.grid)

    first = vorticity2d_step(state, control, params)
    second = vorticity2d_step(state, control, params)

    assert np.array_equal(first.values, second.values)


def test_initial_condition_raises_no_numpy_warnings(params):
    """The zero wavenumber is masked before any division."""
    with warnings.catch_warnings():
        warnings.simplefilter("error", RuntimeWarning)
        state = decaying_turbulence_ic(params, 6)

    assert np.all(np.isfinite(state.values))
