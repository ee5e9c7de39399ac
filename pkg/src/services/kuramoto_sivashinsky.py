"""
Kuramoto–Sivashinsky flow map with zero-order-hold forcing.

    y_t = -y y_x - y_xx - y_xxxx + mu cos(4 pi x / L) + f(x, u)

Fourier pseudo-spectral in space (3/2-rule dealiasing of y y_x), ETDRK4 in
time with the contour-integral coefficients of Kassam & Trefethen. The
forcing is constant over a control interval, so it rides along with the
nonlinear term.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np

from src.core.errors import BlowUpError, ShapeMismatchError
from src.core.grid import Field, FloatArray, Grid1D, ensure_same_grid
from src.core.params import BLOW_UP_THRESHOLD, KsParams

logger = logging.getLogger(__name__)

CONTOUR_POINTS = 32
IC_MODES = 8

ComplexArray = np.ndarray


@dataclass(frozen=True)
class _EtdCoefficients:
    """Per-(grid, step) operators; cached because every episode reuses them."""

    wavenumbers: FloatArray
    derivative: ComplexArray
    exp_full: FloatArray
    exp_half: FloatArray
    f0: FloatArray
    f1: FloatArray
    f2: FloatArray
    f3: FloatArray
    padded_points: int


@lru_cache(maxsize=32)
def _coefficients(length: float, n_points: int, h: float) -> _EtdCoefficients:
    k = 2.0 * np.pi * np.fft.rfftfreq(n_points, d=length / n_points)
    lin = k**2 - k**4
    # Nyquist mode carries no odd derivative.
    k_odd = k.copy()
    k_odd[-1] = 0.0

    roots = np.exp(1j * np.pi * (np.arange(CONTOUR_POINTS) + 0.5) / CONTOUR_POINTS)
    lr = h * lin[:, None] + roots[None, :]
    exp_lr = np.exp(lr)
    f0 = h * np.real(np.mean((np.exp(lr / 2.0) - 1.0) / lr, axis=1))
    f1 = h * np.real(np.mean((-4.0 - lr + exp_lr * (4.0 - 3.0 * lr + lr**2)) / lr**3, axis=1))
    f2 = h * np.real(np.mean((2.0 + lr + exp_lr * (lr - 2.0)) / lr**3, axis=1))
    f3 = h * np.real(np.mean((-4.0 - 3.0 * lr - lr**2 + exp_lr * (4.0 - lr)) / lr**3, axis=1))

    return _EtdCoefficients(
        wavenumbers=k,
        derivative=1j * k_odd,
        exp_full=np.exp(h * lin),
        exp_half=np.exp(0.5 * h * lin),
        f0=f0,
        f1=f1,
        f2=f2,
        f3=f3,
        padded_points=3 * n_points // 2,
    )


def _dealiased_square(v_hat: ComplexArray, n_points: int, padded_points: int) -> ComplexArray:
    """Spectrum of y^2 computed on a 3/2-padded grid and truncated back."""
    padded = np.zeros(padded_points // 2 + 1, dtype=np.complex128)
    padded[: n_points // 2] = v_hat[: n_points // 2]
    scale = padded_points / n_points
    y_pad = np.fft.irfft(padded, n=padded_points) * scale
    sq_hat = np.fft.rfft(y_pad * y_pad)[: n_points // 2 + 1] / scale
    sq_hat[-1] = 0.0
    return sq_hat


def _nonlinear(
    v_hat: ComplexArray, forcing_hat: ComplexArray, coeffs: _EtdCoefficients, n_points: int
) -> ComplexArray:
    return -0.5 * coeffs.derivative * _dealiased_square(v_hat, n_points, coeffs.padded_points) + forcing_hat


def _check_blow_up(values: FloatArray, substep: int) -> None:
    if not np.all(np.isfinite(values)) or np.max(np.abs(values)) > BLOW_UP_THRESHOLD:
        raise BlowUpError(f"Kuramoto-Sivashinsky state left the finite range at substep {substep}")


def inhomogeneity(grid: Grid1D, mu: float) -> FloatArray:
    """Spatially fixed disturbance mu * cos(4 pi x / L)."""
    return mu * np.cos(4.0 * np.pi * grid.coordinates() / grid.length)


def ks_step(state: Field, control_field: Field, params: KsParams) -> Field:
    """Advances the KS state by one control interval `params.dt` with the control held fixed."""
    ensure_same_grid(state, control_field)
    grid = state.grid
    if not isinstance(grid, Grid1D) or not grid.periodic:
        raise ShapeMismatchError("ks_step requires a periodic 1D grid")
    if grid.n_points != params.n_points or grid.length != params.L:
        raise ShapeMismatchError(f"state grid {grid} does not match KS parameters {params}")

    n = grid.n_points
    coeffs = _coefficients(grid.length, n, params.inner_dt)
    forcing = control_field.values[0]
    if params.mu:
        forcing = forcing + inhomogeneity(grid, params.mu)
    forcing_hat = np.fft.rfft(forcing)

    v = np.fft.rfft(state.values[0])
    for substep in range(params.substeps):
        n_v = _nonlinear(v, forcing_hat, coeffs, n)
        a = coeffs.exp_half * v + coeffs.f0 * n_v
        n_a = _nonlinear(a, forcing_hat, coeffs, n)
        b = coeffs.exp_half * v + coeffs.f0 * n_a
        n_b = _nonlinear(b, forcing_hat, coeffs, n)
        c = coeffs.exp_half * a + coeffs.f0 * (2.0 * n_b - n_v)
        n_c = _nonlinear(c, forcing_hat, coeffs, n)
        v = coeffs.exp_full * v + coeffs.f1 * n_v + 2.0 * coeffs.f2 * (n_a + n_b) + coeffs.f3 * n_c
        if not np.all(np.isfinite(v)):
            raise BlowUpError(f"Kuramoto-Sivashinsky spectrum became non-finite at substep {substep}")

    values = np.fft.irfft(v, n=n)
    _check_blow_up(values, params.substeps - 1)
    return Field(values[np.newaxis], grid)


def ks_initial_condition(grid: Grid1D, rng_seed: Union[int, np.random.Generator]) -> Field:
    """
    Smooth random mean-free field built from the first `IC_MODES` Fourier modes.

    Coefficients are standard normal and the field is rescaled to unit spatial
    variance. Modes above the cutoff are zero in the generating spectrum.
    """
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    n = grid.n_points
    spectrum = np.zeros(n // 2 + 1, dtype=np.complex128)
    modes = min(IC_MODES, n // 2 - 1)
    spectrum[1 : modes + 1] = rng.standard_normal(modes) + 1j * rng.standard_normal(modes)
    values = np.fft.irfft(spectrum, n=n)
    values /= np.sqrt(np.mean(values**2))
    return Field(values[np.newaxis], grid)
