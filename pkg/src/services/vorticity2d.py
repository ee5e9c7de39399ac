"""
Two-dimensional vorticity transport on the doubly periodic box [0, 2*pi)^2.

    w_t + u w_x + v w_y = (1/Re) (w_xx + w_yy) + f(x, y, u)
    lap(psi) = -w,   u = psi_y,   v = -psi_x

Pseudo-spectral in space with the 2/3 truncation rule, classical RK4 with an
integrating factor for the viscous term. Axis 0 of a field is x, axis 1 is y.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np

from src.core.errors import BlowUpError, ShapeMismatchError
from src.core.grid import Field, FloatArray, Grid2D, ensure_same_grid
from src.core.params import BLOW_UP_THRESHOLD, Vorticity2dParams

logger = logging.getLogger(__name__)

ComplexArray = np.ndarray


@dataclass(frozen=True)
class _Spectral:
    kx: FloatArray
    ky: FloatArray
    k_squared: FloatArray
    inverse_laplacian: FloatArray
    mask: FloatArray


@lru_cache(maxsize=8)
def _spectral(n_grid: int, length: float) -> _Spectral:
    scale = 2.0 * np.pi / length
    kx = (np.fft.fftfreq(n_grid, d=1.0 / n_grid) * scale)[:, None]
    ky = (np.fft.rfftfreq(n_grid, d=1.0 / n_grid) * scale)[None, :]
    k_squared = kx**2 + ky**2
    inverse = np.zeros_like(k_squared)
    np.divide(1.0, k_squared, out=inverse, where=k_squared > 0)
    cutoff = scale * n_grid / 3.0
    mask = ((np.abs(kx) < cutoff) & (np.abs(ky) < cutoff)).astype(np.float64)
    return _Spectral(kx=kx, ky=ky, k_squared=k_squared, inverse_laplacian=inverse, mask=mask)


def _velocity_hat(w_hat: ComplexArray, spec: _Spectral) -> tuple[ComplexArray, ComplexArray]:
    psi_hat = w_hat * spec.inverse_laplacian
    return 1j * spec.ky * psi_hat, -1j * spec.kx * psi_hat


def velocity(state: Field) -> tuple[FloatArray, FloatArray]:
    """Velocity components (u, v) recovered from the vorticity through the streamfunction."""
    grid = _require_2d(state)
    spec = _spectral(grid.n_points, grid.length)
    n = grid.n_points
    u_hat, v_hat = _velocity_hat(np.fft.rfft2(state.values[0]), spec)
    return np.fft.irfft2(u_hat, s=(n, n)), np.fft.irfft2(v_hat, s=(n, n))


def _advection(w_hat: ComplexArray, forcing_hat: ComplexArray, spec: _Spectral, n: int) -> ComplexArray:
    w_hat = w_hat * spec.mask
    u_hat, v_hat = _velocity_hat(w_hat, spec)
    u = np.fft.irfft2(u_hat, s=(n, n))
    v = np.fft.irfft2(v_hat, s=(n, n))
    w_x = np.fft.irfft2(1j * spec.kx * w_hat, s=(n, n))
    w_y = np.fft.irfft2(1j * spec.ky * w_hat, s=(n, n))
    return -np.fft.rfft2(u * w_x + v * w_y) * spec.mask + forcing_hat


def _require_2d(state: Field) -> Grid2D:
    if not isinstance(state.grid, Grid2D) or state.n_components != 1:
        raise ShapeMismatchError("vorticity fields are single-component fields on a 2D periodic grid")
    return state.grid


def vorticity2d_step(state: Field, control_field: Field, params: Vorticity2dParams) -> Field:
    """Advances the vorticity by one control interval with the forcing held fixed."""
    ensure_same_grid(state, control_field)
    grid = _require_2d(state)
    if grid.n_points != params.n_grid:
        raise ShapeMismatchError(f"state grid {grid} does not match vorticity parameters {params}")

    n = grid.n_points
    h = params.inner_dt
    spec = _spectral(n, grid.length)
    decay_full = np.exp(-spec.k_squared * h / params.Re)
    decay_half = np.exp(-spec.k_squared * 0.5 * h / params.Re)
    forcing_hat = np.fft.rfft2(control_field.values[0])

    w = np.fft.rfft2(state.values[0])
    for substep in range(params.substeps):
        a = _advection(w, forcing_hat, spec, n)
        b = _advection(decay_half * (w + 0.5 * h * a), forcing_hat, spec, n)
        c = _advection(decay_half * w + 0.5 * h * b, forcing_hat, spec, n)
        d = _advection(decay_full * w + h * decay_half * c, forcing_hat, spec, n)
        w = decay_full * w + (h / 6.0) * (decay_full * a + 2.0 * decay_half * (b + c) + d)
        if not np.all(np.isfinite(w)):
            raise BlowUpError(f"vorticity spectrum became non-finite at substep {substep}")

    values = np.fft.irfft2(w, s=(n, n))
    if np.max(np.abs(values)) > BLOW_UP_THRESHOLD:
        raise BlowUpError(f"vorticity exceeded {BLOW_UP_THRESHOLD:g}")
    return Field(values[np.newaxis], grid)


def kinetic_energy(state: Field) -> float:
    """Mean kinetic energy 0.5 <u^2 + v^2>."""
    u, v = velocity(state)
    return 0.5 * float(np.mean(u**2 + v**2))


def enstrophy(state: Field) -> float:
    """Mean-square vorticity <w^2>."""
    return float(np.mean(state.values[0] ** 2))


def _velocity_length_product(state: Field) -> float:
    u, v = velocity(state)
    mean_sq_velocity = float(np.mean(u**2 + v**2))
    # y* = sqrt(<|u|^2>), l* = sqrt(<|u|^2> / <w^2>)
    return mean_sq_velocity / np.sqrt(enstrophy(state))


def reynolds_number(state: Field, params: Vorticity2dParams) -> float:
    """Re = y* l* / nu with the viscosity nu = 1 / params.Re."""
    return _velocity_length_product(state) * params.Re


def decaying_turbulence_ic(params: Vorticity2dParams, rng_seed: Union[int, np.random.Generator]) -> Field:
    """
    Random zero-mean vorticity with energy spectrum E(k) ~ k^4 exp(-(k/k_p)^2).

    Phases are uniform. The amplitude is chosen so the velocity and length
    scales of the generated field satisfy y* l* = 1, i.e. the flow's measured
    Reynolds number equals `params.Re`.
    """
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    grid = params.grid
    n = grid.n_points
    spec = _spectral(n, grid.length)

    k = np.sqrt(spec.k_squared)
    energy = k**4 * np.exp(-((k / params.peak_wavenumber) ** 2))
    density = np.zeros_like(k)
    np.divide(energy, np.pi * k, out=density, where=k > 0)
    amplitude = np.sqrt(density) * k
    phases = rng.uniform(0.0, 2.0 * np.pi, size=k.shape)
    w_hat = amplitude * np.exp(1j * phases) * spec.mask
    w_hat[0, 0] = 0.0

    values = np.fft.irfft2(w_hat, s=(n, n))
    values -= values.mean()
    field = Field(values[np.newaxis], grid)
    return field.scaled(1.0 / _velocity_length_product(field))
