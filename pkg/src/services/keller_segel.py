"""
Keller–Segel chemotaxis with control acting on the chemoattractant:

    y_t = (D y_x - chi y z_x)_x + q y (1 - y)
    z_t = z_xx + y - z + f(x, u)

on [0, L] with homogeneous Neumann ends. Second-order finite volumes on the
node grid (half cells at both ends, i.e. the ghost-point closure), and the
L-stable ARS(2,2,2) IMEX Runge–Kutta scheme: diffusion and the linear decay
of z implicit, chemotaxis, logistic growth and the y -> z source explicit.

Stages are written in increment form around the full right-hand side so a
homogeneous steady state produces exactly zero increments.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Union

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import factorized

from src.core.errors import BlowUpError, ShapeMismatchError
from src.core.grid import Field, FloatArray, Grid1D, ensure_same_grid
from src.core.params import BLOW_UP_THRESHOLD, KellerSegelParams

logger = logging.getLogger(__name__)

GAMMA = 1.0 - 1.0 / math.sqrt(2.0)
DELTA = 1.0 - 1.0 / (2.0 * GAMMA)
NEGATIVE_DENSITY_TOLERANCE = -1e-8
IC_MODES = 8
IC_AMPLITUDE = 0.1

Solver = Callable[[FloatArray], FloatArray]


def neumann_laplacian(values: FloatArray, dx: float) -> FloatArray:
    """Second difference with the ghost-point closure v[-1] = v[1], v[n] = v[n-2]."""
    lap = np.empty_like(values)
    lap[1:-1] = (values[:-2] - 2.0 * values[1:-1] + values[2:]) / dx**2
    lap[0] = 2.0 * (values[1] - values[0]) / dx**2
    lap[-1] = 2.0 * (values[-2] - values[-1]) / dx**2
    return lap


def chemotactic_divergence(y: FloatArray, z: FloatArray, dx: float) -> FloatArray:
    """Finite-volume (y z_x)_x with zero flux through both end faces."""
    face_flux = 0.5 * (y[:-1] + y[1:]) * (z[1:] - z[:-1]) / dx
    div = np.empty_like(y)
    div[1:-1] = (face_flux[1:] - face_flux[:-1]) / dx
    div[0] = face_flux[0] / (0.5 * dx)
    div[-1] = -face_flux[-1] / (0.5 * dx)
    return div


def neumann_boundary_flux(state: Field, params: KellerSegelParams) -> FloatArray:
    """
    Boundary fluxes (D y_x - chi y z_x, z_x) at x=0 and x=L under the ghost-point closure.

    Returns an array of shape (2 components, 2 ends).
    """
    # Ghost nodes mirror the first interior node on each side.
    padded = np.pad(state.values, ((0, 0), (1, 1)), mode="reflect")
    gradient = (padded[:, 2:] - padded[:, :-2]) / (2.0 * state.grid.dx)
    y = state.values[0]
    fluxes = np.empty((2, 2))
    for end, node in enumerate((0, -1)):
        y_x, z_x = gradient[0, node], gradient[1, node]
        fluxes[0, end] = params.D * y_x - params.chi * y[node] * z_x
        fluxes[1, end] = z_x
    return fluxes


@dataclass(frozen=True)
class _ImplicitSolvers:
    cells: Solver
    chemo: Solver


@lru_cache(maxsize=16)
def _solvers(n_points: int, dx: float, diffusion: float, h_gamma: float) -> _ImplicitSolvers:
    main = np.full(n_points, -2.0)
    upper = np.ones(n_points - 1)
    lower = np.ones(n_points - 1)
    upper[0] = 2.0
    lower[-1] = 2.0
    lap = sparse.diags([lower, main, upper], [-1, 0, 1], format="csc") / dx**2
    eye = sparse.identity(n_points, format="csc")
    cells = factorized((eye - h_gamma * diffusion * lap).tocsc())
    chemo = factorized((eye - h_gamma * (lap - eye)).tocsc())
    return _ImplicitSolvers(cells=cells, chemo=chemo)


def _implicit_part(y: FloatArray, z: FloatArray, dx: float, params: KellerSegelParams) -> FloatArray:
    return np.stack([params.D * neumann_laplacian(y, dx), neumann_laplacian(z, dx) - z])


def _explicit_part(
    y: FloatArray, z: FloatArray, forcing: FloatArray, dx: float, params: KellerSegelParams
) -> FloatArray:
    growth = params.q * y * (1.0 - y)
    return np.stack([growth - params.chi * chemotactic_divergence(y, z, dx), y + forcing])


def _check_blow_up(values: FloatArray, substep: int) -> None:
    if not np.all(np.isfinite(values)) or np.max(np.abs(values)) > BLOW_UP_THRESHOLD:
        raise BlowUpError(f"Keller-Segel state left the finite range at substep {substep}")


def keller_segel_step(state: Field, control_field: Field, params: KellerSegelParams) -> Field:
    """Advances (y, z) by one control interval with the forcing on the z-equation held fixed."""
    ensure_same_grid(state, control_field)
    grid = state.grid
    if not isinstance(grid, Grid1D) or grid.periodic or state.n_components != 2:
        raise ShapeMismatchError("keller_segel_step requires a two-component state on a Neumann 1D grid")
    if grid.n_points != params.n_points or grid.length != params.L:
        raise ShapeMismatchError(f"state grid {grid} does not match Keller-Segel parameters {params}")

    dx = grid.dx
    h = params.inner_dt
    solvers = _solvers(grid.n_points, dx, params.D, h * GAMMA)
    forcing = control_field.values[0]

    def rhs(u: FloatArray) -> tuple[FloatArray, FloatArray]:
        implicit = _implicit_part(u[0], u[1], dx, params)
        return implicit + _explicit_part(u[0], u[1], forcing, dx, params), implicit

    def solve(rhs_values: FloatArray) -> FloatArray:
        return np.stack([solvers.cells(rhs_values[0]), solvers.chemo(rhs_values[1])])

    u = state.values.copy()
    for substep in range(params.substeps):
        r1, implicit1 = rhs(u)
        y2 = u + solve(h * GAMMA * r1)
        r2, implicit2 = rhs(y2)
        u = u + solve(h * (DELTA * r1 + (1.0 - DELTA) * r2 + (GAMMA - DELTA) * (implicit1 - implicit2)))
        _check_blow_up(u, substep)

    min_density = float(u[0].min())
    if min_density < NEGATIVE_DENSITY_TOLERANCE:
        logger.warning("Negative cell density after Keller-Segel step: min(y)=%.3e", min_density)
    return Field(u, grid)


def keller_segel_initial_condition(
    params: KellerSegelParams, rng_seed: Union[int, np.random.Generator]
) -> Field:
    """y = 1 + 0.1 * (smooth unit-RMS cosine noise), z = y."""
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    grid = params.grid
    x = grid.coordinates()
    coefficients = rng.standard_normal(IC_MODES)
    modes = np.arange(1, IC_MODES + 1)
    noise = coefficients @ np.cos(np.outer(modes, np.pi * x / grid.length))
    noise /= np.sqrt(grid.mean(noise**2))
    y = 1.0 + IC_AMPLITUDE * noise
    return Field(np.stack([y, y.copy()]), grid)


def total_mass(state: Field) -> float:
    """Trapezoidal integral of the cell density."""
    return state.grid.integrate(state.values[0])


def logistic_source(state: Field, params: KellerSegelParams) -> float:
    """q * integral of y (1 - y); the exact rate of change of the total cell mass."""
    y = state.values[0]
    return state.grid.integrate(params.q * y * (1.0 - y))
